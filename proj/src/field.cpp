#include "field.hpp"

namespace fplo {

PhaseSpaceField PhaseSpaceField::zero(const Mesh2D& mesh,
                                      const SphericalBasis& basis) {
  PhaseSpaceField f;
  f.even = Block::Zero(mesh.vertex_count(), basis.even_count());
  f.odd = Block::Zero(mesh.triangle_count(), basis.odd_count());
  return f;
}

bool PhaseSpaceField::conforms(const Mesh2D& mesh,
                               const SphericalBasis& basis) const {
  return even.rows() == mesh.vertex_count() && even.cols() == basis.even_count() &&
         odd.rows() == mesh.triangle_count() && odd.cols() == basis.odd_count();
}

double PhaseSpaceField::max_abs() const {
  double m = 0.0;
  if (even.size()) m = even.cwiseAbs().maxCoeff();
  if (odd.size()) m = std::max(m, odd.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace fplo

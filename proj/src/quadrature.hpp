#pragma once

#include <vector>

namespace fplo {

/// One-dimensional quadrature rule on a reference interval.
struct Rule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n points on [-1, 1]; exact for polynomials
/// of degree 2n-1. Nodes found by Newton iteration on P_n.
Rule1D gauss_legendre(int n);

/// Gauss-Legendre rule mapped to [a, b].
Rule1D gauss_legendre(int n, double a, double b);

/// Quadrature rule on the reference triangle (0,0)-(1,0)-(0,1) given in
/// barycentric-free (x, y, w) form with weights summing to the area 1/2.
struct TriangleRule {
  std::vector<double> x, y, w;
  int degree;  // highest polynomial degree integrated exactly
};

/// Symmetric 12-point rule, exact to degree 6.
const TriangleRule& triangle_rule_degree6();

}  // namespace fplo

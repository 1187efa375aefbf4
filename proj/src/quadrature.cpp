#include "quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace fplo {

Rule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need n >= 1");
  Rule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    rule.points[i] = -z;
    rule.points[n - 1 - i] = z;
    rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

Rule1D gauss_legendre(int n, double a, double b) {
  Rule1D rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double hl = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.points[i] = mid + hl * rule.points[i];
    rule.weights[i] *= hl;
  }
  return rule;
}

const TriangleRule& triangle_rule_degree6() {
  // Dunavant degree-6 rule: three symmetry orbits, 12 points.
  static const TriangleRule rule = [] {
    TriangleRule r;
    r.degree = 6;
    struct Orbit {
      double a, b, w;
    };
    const Orbit orbits[] = {
        {0.063089014491502, 0.873821971016996, 0.050844906370207},
        {0.249286745170910, 0.501426509658179, 0.116786275726379},
        {0.053145049844817, 0.310352451033784, 0.082851075618374},
    };
    auto push = [&r](double l1, double l2, double l3, double w) {
      r.x.push_back(l2);  // vertex order (0,0),(1,0),(0,1)
      r.y.push_back(l3);
      r.w.push_back(w * 0.5);  // weights given relative to unit area
    };
    for (const auto& o : orbits) {
      const bool two_distinct = std::abs(o.a - o.b) > 1e-12 &&
                                std::abs(1.0 - 2.0 * o.a - o.b) > 1e-12;
      if (!two_distinct) {
        push(o.a, o.a, 1.0 - 2.0 * o.a, o.w);
        push(o.a, 1.0 - 2.0 * o.a, o.a, o.w);
        push(1.0 - 2.0 * o.a, o.a, o.a, o.w);
      } else {
        const double c = 1.0 - o.a - o.b;
        push(o.a, o.b, c, o.w);
        push(o.b, c, o.a, o.w);
        push(c, o.a, o.b, o.w);
        push(o.a, c, o.b, o.w);
        push(o.b, o.a, c, o.w);
        push(c, o.b, o.a, o.w);
      }
    }
    return r;
  }();
  return rule;
}

}  // namespace fplo

#ifndef SHAPING_QUADRATURE_HPP
#define SHAPING_QUADRATURE_HPP

#include <vector>

namespace shaping {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for integral of exp(-x^2) f(x) over the real line.
QuadratureRule gauss_hermite(int n);

/// Gauss-Laguerre rule for integral of exp(-x) f(x) over [0, inf).
QuadratureRule gauss_laguerre(int n);

}  // namespace shaping

#endif  // SHAPING_QUADRATURE_HPP

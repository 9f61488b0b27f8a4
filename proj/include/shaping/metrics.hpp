#ifndef SHAPING_METRICS_HPP
#define SHAPING_METRICS_HPP

#include <span>
#include <string>
#include <vector>

#include "shaping/constellation.hpp"

namespace shaping {

struct QuadratureOptions {
  int nodes = 32;
  int check_nodes = 48;  // 0 disables the convergence check
  double tolerance_bits = 1e-4;
};

/// Exact MI (bits/2D) of the constellation over complex AWGN of total
/// variance sigma2, by 2D Gauss-Hermite quadrature around every point.
/// Returns the check_nodes value; throws NumericalError when the two rules
/// disagree by more than the tolerance.
double mi_exact_awgn(const Constellation& c, double sigma2,
                     const QuadratureOptions& options = {});

struct MiEstimate {
  double bits = 0.0;
  double std_error = 0.0;
  std::size_t clamped = 0;  // symbols whose posterior hit the 1e-300 floor
};

/// H(P_S) - mean(-log2 p(x_i | y_i)) with the Gaussian-channel posterior.
MiEstimate mi_monte_carlo(std::span<const std::size_t> tx_indices,
                          std::span<const cplx> rx, const Constellation& c,
                          double sigma2);

struct KdeEstimate {
  double bits = 0.0;
  double std_error = 0.0;
  std::vector<std::size_t> excluded_points;
  std::vector<std::string> warnings;
};

/// Mismatched-decoding MI estimate (bits/2D) from Gaussian kernel density
/// fits of each conditional p(y | s_k). Per-class Silverman bandwidth
/// h = sigma_k n_k^(-1/6); two-fold sample splitting, averaged over both
/// folds. Points with fewer than two fitting samples are excluded and the
/// prior renormalized over the rest.
KdeEstimate mi_kde(std::span<const std::size_t> tx_indices,
                   std::span<const cplx> rx, const Constellation& c);

/// Dual-polarization MI: sum of the two per-polarization 2D values.
double report_4d(double mi_2d_x, double mi_2d_y);

}  // namespace shaping

#endif  // SHAPING_METRICS_HPP

#ifndef SHAPING_CONSTELLATION_HPP
#define SHAPING_CONSTELLATION_HPP

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace shaping {

using cplx = std::complex<double>;

/// A finite 2D signal set with occurrence probabilities.
///
/// Invariants (checked on construction): at least two points, probabilities
/// nonnegative and summing to one within 1e-9, and unit mean power
/// sum_k p_k |s_k|^2 = 1 within 1e-9. Use normalize_power() to build one from
/// an arbitrary grid.
class Constellation {
 public:
  Constellation(std::vector<cplx> points, std::vector<double> probs);

  std::size_t size() const { return points_.size(); }
  std::span<const cplx> points() const { return points_; }
  std::span<const double> probs() const { return probs_; }
  const cplx& point(std::size_t k) const { return points_[k]; }
  double prob(std::size_t k) const { return probs_[k]; }

  double mean_power() const;

 private:
  std::vector<cplx> points_;
  std::vector<double> probs_;
};

struct Moments {
  double mu4;
  double mu6;
};

// Throws ValidationError unless probs is a distribution (tolerance 1e-9).
void validate_distribution(std::span<const double> probs);

/// Scales points by one positive scalar so that sum_k p_k |c s_k|^2 = 1.
Constellation normalize_power(std::span<const cplx> points,
                              std::span<const double> probs);

/// Standardized moments E|s|^4 / (E|s|^2)^2 and E|s|^6 / (E|s|^2)^3.
/// Scale invariant, so unnormalized input is accepted.
Moments standardized_moments(std::span<const cplx> points,
                             std::span<const double> probs);
Moments standardized_moments(const Constellation& c);

/// Shannon entropy in bits, with 0 log 0 = 0.
double entropy_bits(std::span<const double> probs);

/// Unnormalized square QAM grid {+-1, +-3, ...}^2 for M in {4, 16, 64, 256, ...}.
std::vector<cplx> qam_grid(int order);

/// Uniform, power-normalized square QAM.
Constellation make_qam(int order);

/// p_k proportional to exp(-lambda |s_k|^2) on the given grid, then
/// power-normalized.
Constellation maxwell_boltzmann(std::span<const cplx> points, double lambda);

/// Bisection for the MB parameter that yields the requested entropy.
double mb_lambda_for_entropy(std::span<const cplx> points, double target_bits,
                             double tol = 1e-12);

struct MbOptimum {
  double lambda;
  double mi_bits;
  Constellation constellation;
};

/// Scalar functional scoring a candidate constellation (MI, bits/2D).
using ConstellationScore = std::function<double(const Constellation&)>;

/// Maximizes score over lambda in [0, lambda_max]. The grid is first
/// normalized to unit power under uniform probabilities, so lambda is in
/// units of inverse normalized power. A 21-point scan brackets the optimum,
/// golden-section search refines it to lambda_tol.
MbOptimum optimize_mb_lambda(std::span<const cplx> points,
                             const ConstellationScore& score,
                             double lambda_max = 20.0,
                             double lambda_tol = 1e-4);

/// i.i.d. symbol indices drawn from c.probs(); deterministic given seed.
std::vector<std::size_t> sample_sequence(const Constellation& c, std::size_t n,
                                         std::uint64_t seed);

std::vector<cplx> symbols_from_indices(const Constellation& c,
                                       std::span<const std::size_t> indices);

nlohmann::json to_json(const Constellation& c);
Constellation constellation_from_json(const nlohmann::json& j);
void save_constellation(const Constellation& c, const std::string& path);
Constellation load_constellation(const std::string& path);

}  // namespace shaping

#endif  // SHAPING_CONSTELLATION_HPP

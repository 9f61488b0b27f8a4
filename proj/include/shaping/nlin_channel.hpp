#ifndef SHAPING_NLIN_CHANNEL_HPP
#define SHAPING_NLIN_CHANNEL_HPP

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "shaping/constellation.hpp"
#include "shaping/link.hpp"

namespace shaping {

/// Coefficients of the modulation-dependent Gaussian NLIN model.
///
/// All powers here are per polarization: sigma2 = sigma2_ase +
/// P^3 (chi0 + chi1 (mu4-2) + chi2 (mu6 - 9 mu4 + 12) + chi3 (mu4-2)^2) is the
/// noise variance (W) on one polarization's matched-filter symbols when that
/// polarization carries mean power P (W).
struct NlinCoeffs {
  double sigma2_ase = 0.0;
  std::array<double, 4> chi{0.0, 0.0, 0.0, 0.0};
  double r2 = 1.0;  // goodness of fit of the calibration, 1 for synthetic sets
};

/// The four moment regressors multiplying chi0..chi3.
std::array<double, 4> nlin_regressors(double mu4, double mu6);

/// ASE variance per polarization in the matched-filter symbol domain:
/// h nu n_sp (G - 1) R_s.
double ase_variance(const LinkParams& link);

/// Total per-polarization noise variance in W. Throws NumericalError when the
/// coefficient set produces a negative variance.
double nlin_variance(const NlinCoeffs& coeffs, double power_w, double mu4,
                     double mu6);

/// nlin_variance / P: the variance in unit-signal-power symbol units.
double normalized_variance(const NlinCoeffs& coeffs, double power_w, double mu4,
                           double mu6);

/// Coefficients of a purely linear channel with the given normalized
/// variance at power 1 W (chi all zero).
NlinCoeffs awgn_coeffs(double sigma2_norm);

/// y = x + n with n circular complex Gaussian of total variance sigma2.
std::vector<cplx> channel_apply(std::span<const cplx> tx, double sigma2,
                                std::uint64_t seed);
std::vector<cplx> channel_apply(std::span<const cplx> tx, double sigma2,
                                std::mt19937_64& rng);

/// Bayes posterior p(s_k | y) under the Gaussian channel, log-sum-exp
/// stabilized.
std::vector<double> posterior(cplx y, const Constellation& c, double sigma2);

/// Natural-log posterior of every point; reuses `out` storage.
void log_posterior(cplx y, std::span<const cplx> points,
                   std::span<const double> log_priors, double sigma2,
                   std::span<double> out);

struct ChiProbe {
  double mu4;
  double mu6;
  double power_w;            // per-polarization launch power
  double measured_variance;  // per-polarization noise variance, W
};

/// Least-squares fit of (measured - sigma2_ase) / P^3 onto the four moment
/// regressors. Throws UnderdeterminedError when the probes do not span all
/// four regressor directions.
NlinCoeffs fit_chi(std::span<const ChiProbe> probes, double sigma2_ase);

nlohmann::json to_json(const NlinCoeffs& coeffs);
NlinCoeffs nlin_coeffs_from_json(const nlohmann::json& j);
void save_nlin_coeffs(const NlinCoeffs& coeffs, const std::string& path);
NlinCoeffs load_nlin_coeffs(const std::string& path);

}  // namespace shaping

#endif  // SHAPING_NLIN_CHANNEL_HPP

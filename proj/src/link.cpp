#include "shaping/link.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "shaping/errors.hpp"

namespace shaping {

void LinkParams::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError(std::string("link parameter ") + name +
                            " must be finite and nonnegative");
  };
  // Dispersion and nonlinearity may be negated (digital back-propagation).
  if (!std::isfinite(dispersion_ps_nm_km) || !std::isfinite(gamma_per_w_km))
    throw ValidationError("dispersion and nonlinearity must be finite");
  nonneg(alpha_db_per_km, "alpha_db_per_km");
  nonneg(span_length_km, "span_length_km");
  nonneg(noise_figure_db, "noise_figure_db");
  if (!(symbol_rate_gbd > 0.0))
    throw ValidationError("symbol rate must be positive");
  if (!(carrier_freq_thz > 0.0))
    throw ValidationError("carrier frequency must be positive");
  if (!(rolloff >= 0.0 && rolloff <= 1.0))
    throw ValidationError("rolloff must lie in [0, 1]");
}

double LinkParams::alpha_linear_per_km() const {
  return alpha_db_per_km * std::log(10.0) / 10.0;
}

double LinkParams::beta2_ps2_per_km() const {
  // beta2 = -D lambda^2 / (2 pi c); D in ps/(nm km), lambda in nm, c in nm/ps.
  const double lambda_nm = kSpeedOfLight / (carrier_freq_thz * 1e12) * 1e9;
  const double c_nm_per_ps = kSpeedOfLight * 1e9 * 1e-12;
  return -dispersion_ps_nm_km * lambda_nm * lambda_nm /
         (2.0 * std::numbers::pi * c_nm_per_ps);
}

double LinkParams::amplifier_gain() const {
  return std::pow(10.0, alpha_db_per_km * span_length_km / 10.0);
}

double LinkParams::n_sp() const {
  return std::pow(10.0, noise_figure_db / 10.0) / 2.0;
}

double LinkParams::effective_length_km() const {
  const double a = alpha_linear_per_km();
  if (a == 0.0) return span_length_km;
  return -std::expm1(-a * span_length_km) / a;
}

double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
double watt_to_dbm(double watt) { return 10.0 * std::log10(watt / 1e-3); }

}  // namespace shaping

#ifndef SHAPING_LINK_HPP
#define SHAPING_LINK_HPP

namespace shaping {

// Physical constants (SI).
inline constexpr double kPlanck = 6.62607015e-34;  // J s
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Single-span link. Defaults describe a 64 GBd, 170 km SSMF span.
struct LinkParams {
  double dispersion_ps_nm_km = 16.8;
  double gamma_per_w_km = 1.14;
  double alpha_db_per_km = 0.21;
  double span_length_km = 170.0;
  double noise_figure_db = 4.5;
  double symbol_rate_gbd = 64.0;
  double rolloff = 0.1;
  double carrier_freq_thz = 193.41;

  // Throws ValidationError on negative loss, length or noise figure,
  // non-positive symbol rate or carrier, or rolloff outside [0, 1]. D and
  // gamma may take either sign so that a link can be inverted.
  void validate() const;

  double alpha_linear_per_km() const;
  // Group-velocity dispersion from D at lambda_c = c / nu, in ps^2/km.
  double beta2_ps2_per_km() const;
  // Power gain restoring the span loss.
  double amplifier_gain() const;
  // Spontaneous emission factor NF / 2.
  double n_sp() const;
  // Effective nonlinear length (1 - exp(-alpha L)) / alpha in km.
  double effective_length_km() const;
};

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

}  // namespace shaping

#endif  // SHAPING_LINK_HPP

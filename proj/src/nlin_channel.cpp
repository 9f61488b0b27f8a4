#include "shaping/nlin_channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "shaping/errors.hpp"

namespace shaping {

std::array<double, 4> nlin_regressors(double mu4, double mu6) {
  return {1.0, mu4 - 2.0, mu6 - 9.0 * mu4 + 12.0, (mu4 - 2.0) * (mu4 - 2.0)};
}

double ase_variance(const LinkParams& link) {
  link.validate();
  const double photon_energy = kPlanck * link.carrier_freq_thz * 1e12;
  return photon_energy * link.n_sp() * (link.amplifier_gain() - 1.0) *
         link.symbol_rate_gbd * 1e9;
}

double nlin_variance(const NlinCoeffs& coeffs, double power_w, double mu4,
                     double mu6) {
  if (!(power_w >= 0.0)) throw ValidationError("launch power must be >= 0");
  if (!std::isfinite(mu4) || !std::isfinite(mu6))
    throw ValidationError("moments must be finite");
  const auto reg = nlin_regressors(mu4, mu6);
  double nli = 0.0;
  for (int i = 0; i < 4; ++i) nli += coeffs.chi[i] * reg[i];
  const double var = coeffs.sigma2_ase + power_w * power_w * power_w * nli;
  if (!(var >= 0.0)) {
    std::ostringstream msg;
    msg << "NLIN coefficients give negative variance " << var << " at P=" << power_w
        << " W, mu4=" << mu4 << ", mu6=" << mu6;
    throw NumericalError(msg.str());
  }
  return var;
}

double normalized_variance(const NlinCoeffs& coeffs, double power_w, double mu4,
                           double mu6) {
  if (!(power_w > 0.0)) throw ValidationError("launch power must be > 0");
  return nlin_variance(coeffs, power_w, mu4, mu6) / power_w;
}

NlinCoeffs awgn_coeffs(double sigma2_norm) {
  NlinCoeffs c;
  c.sigma2_ase = sigma2_norm;
  return c;
}

std::vector<cplx> channel_apply(std::span<const cplx> tx, double sigma2,
                                std::mt19937_64& rng) {
  if (!(sigma2 >= 0.0)) throw ValidationError("noise variance must be >= 0");
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma2 / 2.0));
  std::vector<cplx> rx(tx.begin(), tx.end());
  if (sigma2 == 0.0) return rx;
  for (auto& y : rx) {
    const double re = normal(rng);
    const double im = normal(rng);
    y += cplx(re, im);
  }
  return rx;
}

std::vector<cplx> channel_apply(std::span<const cplx> tx, double sigma2,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return channel_apply(tx, sigma2, rng);
}

void log_posterior(cplx y, std::span<const cplx> points,
                   std::span<const double> log_priors, double sigma2,
                   std::span<double> out) {
  const double inv = 1.0 / sigma2;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points.size(); ++k) {
    out[k] = log_priors[k] - std::norm(y - points[k]) * inv;
    top = std::max(top, out[k]);
  }
  if (!std::isfinite(top))
    throw ValidationError("posterior undefined: all prior probabilities are zero");
  // Terms more than e^-40 below the largest cannot move the sum in double
  // precision.
  double acc = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k)
    if (out[k] - top > -40.0) acc += std::exp(out[k] - top);
  const double lse = top + std::log(acc);
  for (auto& v : out) v -= lse;
}

std::vector<double> posterior(cplx y, const Constellation& c, double sigma2) {
  if (!(sigma2 > 0.0)) throw ValidationError("posterior needs sigma2 > 0");
  std::vector<double> log_priors(c.size());
  for (std::size_t k = 0; k < c.size(); ++k)
    log_priors[k] = c.prob(k) > 0.0 ? std::log(c.prob(k))
                                    : -std::numeric_limits<double>::infinity();
  std::vector<double> out(c.size());
  log_posterior(y, c.points(), log_priors, sigma2, out);
  for (auto& v : out) v = std::exp(v);
  return out;
}

NlinCoeffs fit_chi(std::span<const ChiProbe> probes, double sigma2_ase) {
  static constexpr const char* kNames[4] = {"1", "(mu4-2)", "(mu6-9mu4+12)",
                                            "(mu4-2)^2"};
  const auto rows = static_cast<Eigen::Index>(probes.size());
  Eigen::MatrixXd design(rows, 4);
  Eigen::VectorXd target(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& p = probes[i];
    if (!(p.power_w > 0.0)) throw ValidationError("probe power must be > 0");
    const auto reg = nlin_regressors(p.mu4, p.mu6);
    for (int j = 0; j < 4; ++j) design(i, j) = reg[j];
    target(i) = (p.measured_variance - sigma2_ase) /
                (p.power_w * p.power_w * p.power_w);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design,
                                        Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double threshold = 1e-9 * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold) ++rank;
  if (rank < 4) {
    std::ostringstream msg;
    msg << "chi fit underdetermined: regressor rank " << rank
        << " < 4; unconstrained direction(s):";
    const auto& v = svd.matrixV();
    for (Eigen::Index col = rank; col < 4; ++col) {
      msg << " [";
      for (int j = 0; j < 4; ++j) {
        if (std::abs(v(j, col)) < 1e-9) continue;
        msg << (v(j, col) >= 0 ? " +" : " ") << v(j, col) << "*chi" << j << "~"
            << kNames[j];
      }
      msg << " ]";
    }
    msg << "; add probes with different (mu4, mu6)";
    throw UnderdeterminedError(msg.str());
  }

  const Eigen::Vector4d chi = svd.solve(target);
  const Eigen::VectorXd residual = target - design * chi;
  const double ss_res = residual.squaredNorm();
  const double ss_tot = (target.array() - target.mean()).matrix().squaredNorm();

  NlinCoeffs out;
  out.sigma2_ase = sigma2_ase;
  for (int j = 0; j < 4; ++j) out.chi[j] = chi(j);
  if (ss_tot > 0.0)
    out.r2 = 1.0 - ss_res / ss_tot;
  else
    out.r2 = ss_res == 0.0 ? 1.0 : 0.0;
  return out;
}

nlohmann::json to_json(const NlinCoeffs& coeffs) {
  return {{"sigma2_ase", coeffs.sigma2_ase},
          {"chi", std::vector<double>(coeffs.chi.begin(), coeffs.chi.end())},
          {"r2", coeffs.r2}};
}

NlinCoeffs nlin_coeffs_from_json(const nlohmann::json& j) {
  try {
    NlinCoeffs c;
    c.sigma2_ase = j.at("sigma2_ase").get<double>();
    const auto chi = j.at("chi").get<std::vector<double>>();
    if (chi.size() != 4) throw ValidationError("chi must have four entries");
    std::copy(chi.begin(), chi.end(), c.chi.begin());
    c.r2 = j.value("r2", 1.0);
    if (!(c.sigma2_ase >= 0.0)) throw ValidationError("sigma2_ase must be >= 0");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed NLIN coefficient JSON: ") +
                          e.what());
  }
}

void save_nlin_coeffs(const NlinCoeffs& coeffs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(coeffs).dump(2) << '\n';
}

NlinCoeffs load_nlin_coeffs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open coefficient file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed coefficient file " + path + ": " + e.what());
  }
  return nlin_coeffs_from_json(j);
}

}  // namespace shaping

#include "shaping/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "shaping/errors.hpp"
#include "shaping/nlin_channel.hpp"
#include "shaping/quadrature.hpp"

namespace shaping {

namespace {

constexpr double kNegligible = -40.0;  // log-ratio below which terms are dropped

// Log-sum-exp over a buffer, skipping terms that cannot matter.
double log_sum_exp(std::span<const double> v) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : v) top = std::max(top, x);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : v)
    if (x - top > kNegligible) acc += std::exp(x - top);
  return top + std::log(acc);
}

// Mean equivocation sum_k p_k E_n[-ln q(k | s_k + n)] with one GH order.
double equivocation_nats(const Constellation& c, double sigma2,
                         const QuadratureRule& rule) {
  const std::size_t n = c.size();
  const double sigma = std::sqrt(sigma2);
  const double inv = 1.0 / sigma2;
  std::vector<double> log_priors(n);
  for (std::size_t k = 0; k < n; ++k)
    log_priors[k] = c.prob(k) > 0.0 ? std::log(c.prob(k))
                                    : -std::numeric_limits<double>::infinity();

  // Product-rule nodes with negligible weight are skipped.
  struct Node {
    cplx offset;
    double weight;
  };
  std::vector<Node> nodes;
  const double w_floor = 1e-30 * rule.weights[rule.weights.size() / 2] *
                         rule.weights[rule.weights.size() / 2];
  for (std::size_t a = 0; a < rule.nodes.size(); ++a)
    for (std::size_t b = 0; b < rule.nodes.size(); ++b) {
      const double w = rule.weights[a] * rule.weights[b] / std::numbers::pi;
      if (w < w_floor) continue;
      nodes.push_back({sigma * cplx(rule.nodes[a], rule.nodes[b]), w});
    }

  // Neighbors of each point by increasing distance, so that every node only
  // visits the points whose terms can reach the log-sum-exp.
  double lp_max = -std::numeric_limits<double>::infinity();
  for (double lp : log_priors) lp_max = std::max(lp_max, lp);
  std::vector<std::pair<double, std::size_t>> order(n);

  std::vector<double> terms;
  terms.reserve(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(c.prob(k) > 0.0)) continue;
    for (std::size_t j = 0; j < n; ++j) order[j] = {std::abs(c.point(j) - c.point(k)), j};
    std::sort(order.begin(), order.end());
    double expect = 0.0;
    for (const auto& node : nodes) {
      const cplx y = c.point(k) + node.offset;
      const double r = std::abs(node.offset);
      const double own = log_priors[k] - r * r * inv;
      const double reach =
          r + sigma * std::sqrt(lp_max - log_priors[k] + r * r * inv - kNegligible);
      terms.clear();
      for (const auto& [dist, j] : order) {
        if (dist > reach) break;
        terms.push_back(log_priors[j] - std::norm(y - c.point(j)) * inv);
      }
      expect += node.weight * (log_sum_exp(terms) - own);
    }
    total += c.prob(k) * expect;
  }
  return total;
}

}  // namespace

double mi_exact_awgn(const Constellation& c, double sigma2,
                     const QuadratureOptions& options) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw ValidationError("mi_exact_awgn needs a finite sigma2 > 0");
  const double h_nats = entropy_bits(c.probs()) * std::numbers::ln2;
  auto mi_with = [&](int order) {
    const double eq = equivocation_nats(c, sigma2, gauss_hermite(order));
    return (h_nats - eq) / std::numbers::ln2;
  };
  const double base = mi_with(options.nodes);
  if (options.check_nodes <= 0) return base;
  const double check = mi_with(options.check_nodes);
  if (std::abs(check - base) > options.tolerance_bits) {
    std::ostringstream msg;
    msg << "Gauss-Hermite MI not converged: " << options.nodes << " nodes give "
        << base << ", " << options.check_nodes << " nodes give " << check
        << " bits (sigma2=" << sigma2 << ")";
    throw NumericalError(msg.str());
  }
  return check;
}

MiEstimate mi_monte_carlo(std::span<const std::size_t> tx_indices,
                          std::span<const cplx> rx, const Constellation& c,
                          double sigma2) {
  if (tx_indices.size() != rx.size() || rx.empty())
    throw ValidationError("tx and rx must be nonempty and equal length");
  constexpr double kFloor = 1e-300;
  const double log_floor = std::log(kFloor);
  const std::size_t n = c.size();
  std::vector<double> log_priors(n);
  for (std::size_t k = 0; k < n; ++k)
    log_priors[k] = c.prob(k) > 0.0 ? std::log(c.prob(k))
                                    : -std::numeric_limits<double>::infinity();
  const double h = entropy_bits(c.probs());

  MiEstimate est;
  std::vector<double> lp(n);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const std::size_t k = tx_indices[i];
    if (k >= n) throw ValidationError("symbol index out of range");
    double log_q;
    if (sigma2 > 0.0) {
      log_posterior(rx[i], c.points(), log_priors, sigma2, lp);
      log_q = lp[k];
    } else {
      log_q = rx[i] == c.point(k) ? 0.0 : log_floor;
    }
    if (!(log_q > log_floor)) {
      log_q = log_floor;
      ++est.clamped;
    }
    const double info = -log_q / std::numbers::ln2;
    sum += info;
    sum_sq += info * info;
  }
  const double count = static_cast<double>(rx.size());
  const double mean = sum / count;
  const double var = std::max(0.0, sum_sq / count - mean * mean);
  est.bits = h - mean;
  est.std_error = std::sqrt(var / count);
  return est;
}

namespace {

struct KernelClass {
  std::vector<cplx> samples;
  double bandwidth = 0.0;
  double log_norm = 0.0;  // -log(n_k 2 pi h^2)
  double re_min = 0.0, re_max = 0.0, im_min = 0.0, im_max = 0.0;
};

// Upper bound on the log kernel density of class `cls` at y.
double log_density_bound(const KernelClass& cls, cplx y) {
  const double dx = std::max({cls.re_min - y.real(), 0.0, y.real() - cls.re_max});
  const double dy = std::max({cls.im_min - y.imag(), 0.0, y.imag() - cls.im_max});
  return -(dx * dx + dy * dy) / (2.0 * cls.bandwidth * cls.bandwidth) +
         cls.log_norm + std::log(static_cast<double>(cls.samples.size()));
}

double log_density(const KernelClass& cls, cplx y, std::vector<double>& scratch) {
  const double inv = 1.0 / (2.0 * cls.bandwidth * cls.bandwidth);
  scratch.resize(cls.samples.size());
  for (std::size_t j = 0; j < cls.samples.size(); ++j)
    scratch[j] = -std::norm(y - cls.samples[j]) * inv;
  return log_sum_exp(scratch) + cls.log_norm;
}

struct FoldResult {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
};

FoldResult kde_fold(std::span<const std::size_t> tx, std::span<const cplx> rx,
                    const Constellation& c, std::size_t fit_parity,
                    std::vector<bool>& excluded) {
  const std::size_t n = c.size();
  std::vector<KernelClass> classes(n);
  for (std::size_t i = fit_parity; i < rx.size(); i += 2)
    classes[tx[i]].samples.push_back(rx[i]);

  for (std::size_t k = 0; k < n; ++k) {
    auto& cls = classes[k];
    const std::size_t m = cls.samples.size();
    if (m < 2) {
      excluded[k] = true;
      continue;
    }
    cplx mean = 0.0;
    for (const auto& s : cls.samples) mean += s;
    mean /= static_cast<double>(m);
    double var = 0.0;
    cls.re_min = cls.re_max = cls.samples[0].real();
    cls.im_min = cls.im_max = cls.samples[0].imag();
    for (const auto& s : cls.samples) {
      var += std::norm(s - mean);
      cls.re_min = std::min(cls.re_min, s.real());
      cls.re_max = std::max(cls.re_max, s.real());
      cls.im_min = std::min(cls.im_min, s.imag());
      cls.im_max = std::max(cls.im_max, s.imag());
    }
    // Per-axis standard deviation pooled over the two axes.
    const double sigma = std::sqrt(var / (2.0 * static_cast<double>(m - 1)));
    if (!(sigma > 0.0)) {
      excluded[k] = true;
      continue;
    }
    cls.bandwidth = sigma * std::pow(static_cast<double>(m), -1.0 / 6.0);
    cls.log_norm = -std::log(static_cast<double>(m) * 2.0 * std::numbers::pi *
                             cls.bandwidth * cls.bandwidth);
  }

  double kept_mass = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (!excluded[k]) kept_mass += c.prob(k);
  std::vector<double> log_priors(n, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < n; ++k)
    if (!excluded[k] && c.prob(k) > 0.0) log_priors[k] = std::log(c.prob(k) / kept_mass);

  FoldResult out;
  std::vector<double> scratch;
  std::vector<double> mix;
  mix.reserve(n);
  for (std::size_t i = 1 - fit_parity; i < rx.size(); i += 2) {
    const std::size_t own = tx[i];
    if (excluded[own]) continue;
    const cplx y = rx[i];
    const double own_log = log_density(classes[own], y, scratch);
    const double own_term = log_priors[own] + own_log;
    mix.clear();
    mix.push_back(own_term);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == own || excluded[k] || !std::isfinite(log_priors[k])) continue;
      if (log_priors[k] + log_density_bound(classes[k], y) < own_term + kNegligible)
        continue;
      mix.push_back(log_priors[k] + log_density(classes[k], y, scratch));
    }
    const double info = (own_log - log_sum_exp(mix)) / std::numbers::ln2;
    out.sum += info;
    out.sum_sq += info * info;
    ++out.count;
  }
  return out;
}

}  // namespace

KdeEstimate mi_kde(std::span<const std::size_t> tx_indices,
                   std::span<const cplx> rx, const Constellation& c) {
  if (tx_indices.size() != rx.size() || rx.size() < 4)
    throw ValidationError("KDE needs equal-length tx/rx with at least 4 samples");
  for (auto k : tx_indices)
    if (k >= c.size()) throw ValidationError("symbol index out of range");

  // A point needs two samples in each fold to get a bandwidth.
  std::vector<std::size_t> per_fold[2] = {std::vector<std::size_t>(c.size(), 0),
                                          std::vector<std::size_t>(c.size(), 0)};
  for (std::size_t i = 0; i < tx_indices.size(); ++i) ++per_fold[i % 2][tx_indices[i]];
  std::vector<bool> excluded(c.size(), false);
  for (std::size_t k = 0; k < c.size(); ++k)
    excluded[k] = std::min(per_fold[0][k], per_fold[1][k]) < 2;
  FoldResult total;
  for (std::size_t parity : {0u, 1u}) {
    const auto fold = kde_fold(tx_indices, rx, c, parity, excluded);
    total.sum += fold.sum;
    total.sum_sq += fold.sum_sq;
    total.count += fold.count;
  }
  if (total.count == 0) throw NumericalError("KDE had no usable samples");

  KdeEstimate est;
  const double count = static_cast<double>(total.count);
  const double mean = total.sum / count;
  est.bits = mean;
  est.std_error =
      std::sqrt(std::max(0.0, total.sum_sq / count - mean * mean) / count);
  for (std::size_t k = 0; k < c.size(); ++k)
    if (excluded[k]) est.excluded_points.push_back(k);
  if (!est.excluded_points.empty()) {
    double mass = 0.0;
    for (auto k : est.excluded_points) mass += c.prob(k);
    std::ostringstream msg;
    msg << est.excluded_points.size()
        << " constellation point(s) had too few received samples for a density "
           "fit (probability mass "
        << mass << "); prior renormalized over the rest";
    est.warnings.push_back(msg.str());
  }
  return est;
}

double report_4d(double mi_2d_x, double mi_2d_y) { return mi_2d_x + mi_2d_y; }

}  // namespace shaping

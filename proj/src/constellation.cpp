#include "shaping/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "shaping/errors.hpp"

namespace shaping {

namespace {

constexpr double kDistributionTol = 1e-9;
constexpr double kPowerTol = 1e-9;

double weighted_power(std::span<const cplx> points,
                      std::span<const double> probs) {
  double acc = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k)
    acc += probs[k] * std::norm(points[k]);
  return acc;
}

bool is_power_of_four(int m) {
  if (m < 4) return false;
  while (m % 4 == 0) m /= 4;
  return m == 1;
}

std::vector<cplx> normalized_uniform_grid(std::span<const cplx> points) {
  std::vector<double> uniform(points.size(), 1.0 / points.size());
  auto c = normalize_power(points, uniform);
  return {c.points().begin(), c.points().end()};
}

}  // namespace

void validate_distribution(std::span<const double> probs) {
  if (probs.empty()) throw ValidationError("empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0)
      throw ValidationError("probabilities must be finite and nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "probabilities sum to " << sum << ", expected 1";
    throw ValidationError(msg.str());
  }
}

Constellation::Constellation(std::vector<cplx> points, std::vector<double> probs)
    : points_(std::move(points)), probs_(std::move(probs)) {
  if (points_.size() < 2)
    throw ValidationError("a constellation needs at least two points");
  if (points_.size() != probs_.size())
    throw ValidationError("points and probabilities differ in length");
  for (const auto& s : points_)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw ValidationError("non-finite constellation point");
  validate_distribution(probs_);
  const double power = mean_power();
  if (std::abs(power - 1.0) > kPowerTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "constellation mean power " << power << " is not 1";
    throw ValidationError(msg.str());
  }
}

double Constellation::mean_power() const {
  return weighted_power(points_, probs_);
}

Constellation normalize_power(std::span<const cplx> points,
                              std::span<const double> probs) {
  if (points.size() != probs.size())
    throw ValidationError("points and probabilities differ in length");
  validate_distribution(probs);
  const double power = weighted_power(points, probs);
  if (!(power > 0.0))
    throw DegenerateConstellationError(
        "constellation has zero mean power under the given probabilities");
  const double scale = 1.0 / std::sqrt(power);
  std::vector<cplx> scaled(points.size());
  std::transform(points.begin(), points.end(), scaled.begin(),
                 [scale](cplx s) { return scale * s; });
  return Constellation(std::move(scaled), {probs.begin(), probs.end()});
}

Moments standardized_moments(std::span<const cplx> points,
                             std::span<const double> probs) {
  if (points.size() != probs.size())
    throw ValidationError("points and probabilities differ in length");
  double m2 = 0.0, m4 = 0.0, m6 = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double r2 = std::norm(points[k]);
    m2 += probs[k] * r2;
    m4 += probs[k] * r2 * r2;
    m6 += probs[k] * r2 * r2 * r2;
  }
  if (!(m2 > 0.0))
    throw DegenerateConstellationError("moments undefined at zero power");
  return {m4 / (m2 * m2), m6 / (m2 * m2 * m2)};
}

Moments standardized_moments(const Constellation& c) {
  return standardized_moments(c.points(), c.probs());
}

double entropy_bits(std::span<const double> probs) {
  validate_distribution(probs);
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

std::vector<cplx> qam_grid(int order) {
  if (!is_power_of_four(order))
    throw ValidationError("square QAM order must be a power of four, got " +
                          std::to_string(order));
  const int side = static_cast<int>(std::lround(std::sqrt(order)));
  std::vector<cplx> grid;
  grid.reserve(order);
  for (int i = 0; i < side; ++i)
    for (int q = 0; q < side; ++q)
      grid.emplace_back(2.0 * i - (side - 1), 2.0 * q - (side - 1));
  return grid;
}

Constellation make_qam(int order) {
  const auto grid = qam_grid(order);
  std::vector<double> uniform(grid.size(), 1.0 / grid.size());
  return normalize_power(grid, uniform);
}

Constellation maxwell_boltzmann(std::span<const cplx> points, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ValidationError("Maxwell-Boltzmann lambda must be >= 0");
  if (points.size() < 2) throw ValidationError("need at least two points");
  // Shift exponents by the minimum energy so large lambda cannot underflow
  // every weight at once.
  double min_energy = std::norm(points[0]);
  for (const auto& s : points) min_energy = std::min(min_energy, std::norm(s));
  std::vector<double> probs(points.size());
  double total = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    probs[k] = std::exp(-lambda * (std::norm(points[k]) - min_energy));
    total += probs[k];
  }
  for (double& p : probs) p /= total;
  return normalize_power(points, probs);
}

double mb_lambda_for_entropy(std::span<const cplx> points, double target_bits,
                             double tol) {
  const double h_max = std::log2(static_cast<double>(points.size()));
  if (!(target_bits > 0.0) || target_bits > h_max)
    throw ValidationError("target entropy outside (0, log2 N]");
  auto entropy_at = [&](double lambda) {
    return entropy_bits(maxwell_boltzmann(points, lambda).probs());
  };
  double lo = 0.0, hi = 1.0;
  while (entropy_at(hi) > target_bits) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("entropy target not bracketed");
  }
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (entropy_at(mid) > target_bits)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

MbOptimum optimize_mb_lambda(std::span<const cplx> points,
                             const ConstellationScore& score,
                             double lambda_max, double lambda_tol) {
  if (!(lambda_max > 0.0)) throw ValidationError("lambda_max must be positive");
  const auto grid = normalized_uniform_grid(points);
  auto evaluate = [&](double lambda) {
    const double mi = score(maxwell_boltzmann(grid, lambda));
    if (!std::isfinite(mi))
      throw NumericalError("MI evaluator returned a non-finite value at lambda=" +
                           std::to_string(lambda));
    return mi;
  };

  constexpr int kScan = 21;
  std::vector<double> scan(kScan);
  int best = 0;
  for (int i = 0; i < kScan; ++i) {
    scan[i] = evaluate(lambda_max * i / (kScan - 1));
    if (scan[i] > scan[best]) best = i;
  }
  const double step = lambda_max / (kScan - 1);
  double a = std::max(0.0, (best - 1) * step);
  double b = std::min(lambda_max, (best + 1) * step);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = evaluate(c), fd = evaluate(d);
  while (b - a > lambda_tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = evaluate(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = evaluate(d);
    }
  }
  double lambda = fc >= fd ? c : d;
  double mi = std::max(fc, fd);
  // The bracket endpoints (lambda = 0 in particular) are never interior
  // golden-section probes; keep the scan optimum if it is still better.
  if (scan[best] > mi) {
    lambda = best * step;
    mi = scan[best];
  }
  return {lambda, mi, maxwell_boltzmann(grid, lambda)};
}

std::vector<std::size_t> sample_sequence(const Constellation& c, std::size_t n,
                                         std::uint64_t seed) {
  if (n == 0) throw ValidationError("sequence length must be >= 1");
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> dist(c.probs().begin(),
                                               c.probs().end());
  std::vector<std::size_t> out(n);
  for (auto& idx : out) idx = dist(rng);
  return out;
}

std::vector<cplx> symbols_from_indices(const Constellation& c,
                                       std::span<const std::size_t> indices) {
  std::vector<cplx> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= c.size()) throw ValidationError("symbol index out of range");
    out[i] = c.point(indices[i]);
  }
  return out;
}

nlohmann::json to_json(const Constellation& c) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& s : c.points()) points.push_back({s.real(), s.imag()});
  return {{"points", points},
          {"probabilities",
           std::vector<double>(c.probs().begin(), c.probs().end())}};
}

Constellation constellation_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("points") || !j.contains("probabilities"))
    throw ValidationError(
        "constellation JSON needs \"points\" and \"probabilities\"");
  std::vector<cplx> points;
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ValidationError("each point must be a [re, im] pair");
    points.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  std::vector<double> probs;
  for (const auto& p : j.at("probabilities")) {
    if (!p.is_number()) throw ValidationError("probabilities must be numbers");
    probs.push_back(p.get<double>());
  }
  return normalize_power(points, probs);
}

void save_constellation(const Constellation& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(c).dump(2) << '\n';
}

Constellation load_constellation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open constellation file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed constellation file " + path + ": " +
                          e.what());
  }
  return constellation_from_json(j);
}

}  // namespace shaping

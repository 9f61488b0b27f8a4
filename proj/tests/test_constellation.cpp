#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>

#include "shaping/constellation.hpp"
#include "shaping/errors.hpp"

using namespace shaping;

namespace {

std::vector<double> uniform_probs(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

// Random constellation with random (non-normalized) probabilities.
Constellation random_constellation(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.01, 1.0);
  std::vector<cplx> pts(n);
  std::vector<double> probs(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    pts[k] = {normal(rng), normal(rng)};
    probs[k] = uniform(rng);
    total += probs[k];
  }
  for (auto& p : probs) p /= total;
  return normalize_power(pts, probs);
}

double entropy_oracle(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v) / std::log(2.0);
  return h;
}

}  // namespace

TEST_CASE("normalize_power scales by a single positive factor") {
  const double r = 1.0 / std::sqrt(2.0);
  const std::vector<cplx> unit_qpsk = {{r, r}, {-r, r}, {-r, -r}, {r, -r}};
  const auto same = normalize_power(unit_qpsk, uniform_probs(4));
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(std::abs(same.point(k) - unit_qpsk[k]) < 1e-15);

  const std::vector<cplx> big_qpsk = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  const auto scaled = normalize_power(big_qpsk, uniform_probs(4));
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(std::abs(scaled.point(k) - big_qpsk[k] / std::sqrt(2.0)) < 1e-15);
}

TEST_CASE("MB-shaped 16QAM normalizes to unit power") {
  const auto grid = qam_grid(16);
  std::vector<double> w(16);
  double z = 0.0;
  for (int k = 0; k < 16; ++k) z += (w[k] = std::exp(-0.1 * std::norm(grid[k])));
  for (auto& v : w) v /= z;
  const auto c = normalize_power(grid, w);
  double power = 0.0;
  for (int k = 0; k < 16; ++k) power += w[k] * std::norm(c.point(k));
  CHECK(power == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("normalize_power error paths") {
  const std::vector<cplx> zeros(4, 0.0);
  CHECK_THROWS_AS(normalize_power(zeros, uniform_probs(4)),
                  DegenerateConstellationError);
  const std::vector<cplx> pts = {{1, 0}, {-1, 0}};
  CHECK_THROWS_AS(normalize_power(pts, std::vector<double>{0.5, 0.6}),
                  ValidationError);
  CHECK_THROWS_AS(normalize_power(pts, std::vector<double>{1.5, -0.5}),
                  ValidationError);
  CHECK_THROWS_AS(Constellation({{2, 0}, {-2, 0}}, {0.5, 0.5}), ValidationError);
}

TEST_CASE("normalize_power is idempotent") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto once = random_constellation(rng, 12);
    const auto twice = normalize_power(once.points(), once.probs());
    for (std::size_t k = 0; k < once.size(); ++k)
      CHECK(std::abs(once.point(k) - twice.point(k)) < 1e-12);
  }
}

TEST_CASE("standardized moments of QPSK and uniform 16QAM") {
  const auto qpsk = standardized_moments(make_qam(4));
  CHECK(qpsk.mu4 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(qpsk.mu6 == doctest::Approx(1.0).epsilon(1e-14));

  // Exact integer oracle over the {+-1, +-3}^2 grid.
  std::int64_t m2 = 0, m4 = 0, m6 = 0;
  for (int i : {-3, -1, 1, 3})
    for (int q : {-3, -1, 1, 3}) {
      const std::int64_t e = i * i + q * q;
      m2 += e;
      m4 += e * e;
      m6 += e * e * e;
    }
  // With 16 equiprobable points: mu4 = 16 m4 / m2^2, mu6 = 256 m6 / m2^3.
  const double mu4_exact = 16.0 * m4 / static_cast<double>(m2 * m2);
  const double mu6_exact = 256.0 * m6 / static_cast<double>(m2 * m2 * m2);
  CHECK(mu4_exact == doctest::Approx(1.32).epsilon(1e-15));
  CHECK(mu6_exact == doctest::Approx(1.96).epsilon(1e-15));

  const auto qam16 = standardized_moments(make_qam(16));
  CHECK(qam16.mu4 == doctest::Approx(mu4_exact).epsilon(1e-13));
  CHECK(qam16.mu6 == doctest::Approx(mu6_exact).epsilon(1e-13));
}

TEST_CASE("moments of equiprobable Gaussian samples approach (2, 6)") {
  constexpr std::size_t n = 1'000'000;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::vector<cplx> pts(n);
  for (auto& p : pts) p = {normal(rng), normal(rng)};
  const auto m = standardized_moments(pts, uniform_probs(n));
  // Monte-Carlo standard errors: sd(|s|^4)/sqrt(n) ~ 0.02, sd(|s|^6) ~ 0.15.
  CHECK(m.mu4 == doctest::Approx(2.0).epsilon(0.02));
  CHECK(m.mu6 == doctest::Approx(6.0).epsilon(0.06));
}

TEST_CASE("moments are scale and phase invariant and ordered") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = random_constellation(rng, 2 + trial % 30);
    const auto m = standardized_moments(c);
    CHECK(m.mu4 >= 1.0 - 1e-12);
    CHECK(m.mu6 >= m.mu4 * m.mu4 - 1e-12);

    const cplx rot = 3.7 * std::polar(1.0, phase(rng));
    std::vector<cplx> moved(c.points().begin(), c.points().end());
    for (auto& s : moved) s *= rot;
    const auto m2 = standardized_moments(moved, c.probs());
    CHECK(m2.mu4 == doctest::Approx(m.mu4).epsilon(1e-12));
    CHECK(m2.mu6 == doctest::Approx(m.mu6).epsilon(1e-12));
  }
  const std::vector<cplx> zeros(3, 0.0);
  CHECK_THROWS_AS(standardized_moments(zeros, uniform_probs(3)),
                  DegenerateConstellationError);
}

TEST_CASE("entropy_bits") {
  CHECK(entropy_bits(uniform_probs(256)) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(entropy_bits(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
  CHECK(entropy_bits(std::vector<double>{0.5, 0.25, 0.25}) ==
        doctest::Approx(1.5).epsilon(1e-15));
  CHECK_THROWS_AS(entropy_bits(std::vector<double>{0.5, 0.4}), ValidationError);
}

TEST_CASE("make_qam") {
  const auto qpsk = make_qam(4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(qpsk.point(k)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(qpsk.prob(k) == 0.25);
  }
  const auto qam256 = make_qam(256);
  CHECK(qam256.size() == 256);
  CHECK(entropy_bits(qam256.probs()) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(qam256.mean_power() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(make_qam(32), ValidationError);
  CHECK_THROWS_AS(make_qam(8), ValidationError);
  CHECK_THROWS_AS(make_qam(0), ValidationError);
}

TEST_CASE("maxwell_boltzmann") {
  const auto grid = qam_grid(64);
  const auto flat = maxwell_boltzmann(grid, 0.0);
  for (std::size_t k = 0; k < 64; ++k) CHECK(flat.prob(k) == doctest::Approx(1.0 / 64));

  const auto peaked = maxwell_boltzmann(grid, 50.0);
  std::size_t argmax = 0;
  for (std::size_t k = 0; k < 64; ++k)
    if (peaked.prob(k) > peaked.prob(argmax)) argmax = k;
  CHECK(std::norm(grid[argmax]) == doctest::Approx(2.0));
  double inner = 0.0;
  for (std::size_t k = 0; k < 64; ++k)
    if (std::norm(grid[k]) == 2.0) inner += peaked.prob(k);
  CHECK(inner > 0.999);

  CHECK_THROWS_AS(maxwell_boltzmann(grid, -0.1), ValidationError);

  // Entropy is non-increasing in lambda.
  double previous = 1e9;
  for (int i = 0; i <= 40; ++i) {
    const double h = entropy_bits(maxwell_boltzmann(grid, 0.05 * i).probs());
    CHECK(h <= previous + 1e-12);
    previous = h;
  }
}

TEST_CASE("MB lambda for a target entropy on 256QAM") {
  const auto grid = qam_grid(256);
  const double lambda = mb_lambda_for_entropy(grid, 7.0);
  CHECK(entropy_bits(maxwell_boltzmann(grid, lambda).probs()) ==
        doctest::Approx(7.0).epsilon(1e-9));

  // Independent oracle: plain bisection with an explicit entropy sum.
  auto h_of = [&](double l) {
    std::vector<double> p(grid.size());
    double z = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
      z += (p[k] = std::exp(-l * std::norm(grid[k])));
    for (auto& v : p) v /= z;
    return entropy_oracle(p);
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (h_of(mid) > 7.0 ? lo : hi) = mid;
  }
  CHECK(lambda == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-8));
}

TEST_CASE("optimize_mb_lambda beats the 21-point scan") {
  // Concave in entropy with an interior optimum at H = 4.7 bits.
  const auto grid = qam_grid(64);
  auto score = [](const Constellation& c) {
    const double h = entropy_bits(c.probs());
    return -(h - 4.7) * (h - 4.7);
  };
  const auto best = optimize_mb_lambda(grid, score);
  std::vector<double> uniform(64, 1.0 / 64);
  const auto norm_grid = normalize_power(grid, uniform);
  double scan_best = -1e9;
  for (int i = 0; i <= 20; ++i)
    scan_best = std::max(scan_best, score(maxwell_boltzmann(norm_grid.points(), i)));
  CHECK(best.mi_bits >= scan_best - 1e-4);
  CHECK(entropy_bits(best.constellation.probs()) == doctest::Approx(4.7).epsilon(1e-3));

  // Monotone decreasing score: the optimum is the lambda = 0 endpoint.
  auto prefers_uniform = [](const Constellation& c) { return entropy_bits(c.probs()); };
  CHECK(optimize_mb_lambda(grid, prefers_uniform).lambda == 0.0);

  auto broken = [](const Constellation&) { return std::nan(""); };
  CHECK_THROWS_AS(optimize_mb_lambda(grid, broken), NumericalError);
}

TEST_CASE("sample_sequence") {
  const auto qpsk = make_qam(4);
  CHECK(sample_sequence(qpsk, 1000, 5) == sample_sequence(qpsk, 1000, 5));
  CHECK(sample_sequence(qpsk, 1000, 5) != sample_sequence(qpsk, 1000, 6));

  const Constellation one_hot({{1, 0}, {-1, 0}, {0, 1}}, {0.0, 1.0, 0.0});
  for (auto idx : sample_sequence(one_hot, 500, 1)) CHECK(idx == 1);

  constexpr std::size_t n = 1'000'000;
  const auto seq = sample_sequence(qpsk, n, 99);
  std::vector<std::size_t> counts(4, 0);
  for (auto idx : seq) ++counts[idx];
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - n * 0.25) < 5 * sd);

  CHECK_THROWS_AS(sample_sequence(qpsk, 0, 1), ValidationError);
}

TEST_CASE("constellation JSON round trip keeps full precision") {
  std::mt19937_64 rng(21);
  const auto c = random_constellation(rng, 9);
  const auto path = std::filesystem::temp_directory_path() / "shaping_const.json";
  save_constellation(c, path.string());
  const auto back = load_constellation(path.string());
  for (std::size_t k = 0; k < c.size(); ++k) {
    CHECK(std::abs(back.point(k) - c.point(k)) < 1e-15);
    CHECK(back.prob(k) == c.prob(k));
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(constellation_from_json(nlohmann::json{{"points", {{1, 0}}}}),
                  ValidationError);
  CHECK_THROWS_AS(
      constellation_from_json(nlohmann::json::parse(
          R"({"points": [[1,0],[-1,0]], "probabilities": [0.7, 0.7]})")),
      ValidationError);
}

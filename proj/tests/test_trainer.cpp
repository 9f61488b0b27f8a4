#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "shaping/errors.hpp"
#include "shaping/metrics.hpp"
#include "shaping/trainer.hpp"

using namespace shaping;

namespace {

TrainState random_state(std::size_t n, std::uint64_t seed, double tau) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  TrainState s;
  s.raw_points.resize(n);
  s.logits.resize(n);
  for (auto& p : s.raw_points) p = {normal(rng), normal(rng)};
  for (auto& l : s.logits) l = 0.5 * normal(rng);
  s.adam_m.assign(3 * n, 0.0);
  s.adam_v.assign(3 * n, 0.0);
  s.temperature = tau;
  return s;
}

NlinCoeffs nonlinear_coeffs() {
  NlinCoeffs c;
  c.sigma2_ase = 4.3e-5;
  c.chi = {420.0, 160.0, 25.0, 60.0};
  return c;
}

double objective(const TrainState& s, const NlinCoeffs& c, double p,
                 const Minibatch& b) {
  return forward_objective(s, c, p, b).objective_bits;
}

}  // namespace

TEST_CASE("gumbel-softmax rows") {
  const std::vector<double> logits = {0.3, -1.0, 2.0, 0.0, 0.5};
  const auto rows = gumbel_softmax_sample(logits, 0.7, 200, 3);
  for (std::size_t i = 0; i < 200; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 5; ++k) sum += rows[i * 5 + k];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Small temperature: one-hot at argmax(logits + g).
  std::mt19937_64 rng(4);
  std::vector<double> g(5);
  for (auto& v : g) v = sample_gumbel(rng);
  std::vector<double> row(5);
  gumbel_softmax_rows(logits, g, 1e-4, row);
  std::size_t arg = 0;
  for (std::size_t k = 0; k < 5; ++k)
    if (logits[k] + g[k] > logits[arg] + g[arg]) arg = k;
  CHECK(row[arg] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(gumbel_softmax_rows(logits, g, 0.0, row), ValidationError);
}

TEST_CASE("gumbel-softmax argmax is uniform for equal logits") {
  constexpr std::size_t draws = 100'000, n = 4;
  const std::vector<double> logits(n, 0.25);
  const auto rows = gumbel_softmax_sample(logits, 0.1, draws, 17);
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto* r = &rows[i * n];
    counts[std::max_element(r, r + n) - r] += 1.0;
  }
  const double sd = std::sqrt(draws * 0.25 * 0.75);
  for (double c : counts) CHECK(std::abs(c - draws * 0.25) < 5 * sd);
}

TEST_CASE("objective limits") {
  const auto qpsk = make_qam(4);
  TrainState s = TrainState::from_constellation(qpsk, 1e-3);
  std::mt19937_64 rng(1);
  auto batch = draw_minibatch(4, 4000, rng);
  batch.hard = true;

  // Huge noise: posteriors equal the priors and J vanishes.
  CHECK(std::abs(objective(s, awgn_coeffs(1e8), 1.0, batch)) < 1e-6);
  // Tiny noise with hard rows: posteriors one-hot and J = H = 2 bits.
  CHECK(objective(s, awgn_coeffs(1e-6), 1.0, batch) ==
        doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("hard-sample objective matches the quadrature MI for QPSK") {
  const auto qpsk = make_qam(4);
  const double sigma2 = 0.1;  // Es/N0 = 10 dB
  TrainState s = TrainState::from_constellation(qpsk, 1e-3);
  std::mt19937_64 rng(5);
  auto batch = draw_minibatch(4, 200'000, rng);
  batch.hard = true;
  const auto fwd = forward_objective(s, awgn_coeffs(sigma2), 1.0, batch);

  // Per-row information values give the Monte-Carlo standard error.
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < batch.rows; ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
      row += fwd.cache.soft[i * 4 + k] * fwd.cache.log_post[i * 4 + k];
    sum += row;
    sum_sq += row * row;
  }
  const double m = sum / batch.rows;
  const double se = std::sqrt((sum_sq / batch.rows - m * m) / batch.rows) /
                    std::numbers::ln2;
  const double exact = mi_exact_awgn(qpsk, sigma2);
  CHECK(std::abs(fwd.objective_bits - exact) < 3 * se);
}

TEST_CASE("backward matches central finite differences") {
  constexpr std::size_t n = 8;
  const NlinCoeffs coeffs = nonlinear_coeffs();
  const double power = 4e-3;
  for (double tau : {0.5, 2.0}) {
    TrainState s = random_state(n, 12, tau);
    std::mt19937_64 rng(99);
    const auto batch = draw_minibatch(n, 64, rng);
    const auto fwd = forward_objective(s, coeffs, power, batch);
    const auto grads = backward(s, fwd.cache);

    const double h = 1e-5;
    auto check = [&](double analytic, auto&& perturb) {
      TrainState plus = s, minus = s;
      perturb(plus, h);
      perturb(minus, -h);
      // backward returns d(-J)/d(theta)
      const double fd = -(objective(plus, coeffs, power, batch) -
                          objective(minus, coeffs, power, batch)) /
                        (2 * h);
      CHECK(std::isfinite(analytic));
      const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-10});
      CHECK(std::abs(fd - analytic) / scale < 1e-4);
    };
    for (std::size_t k = 0; k < n; ++k) {
      check(grads.points[k].real(),
            [k](TrainState& t, double d) { t.raw_points[k] += cplx(d, 0); });
      check(grads.points[k].imag(),
            [k](TrainState& t, double d) { t.raw_points[k] += cplx(0, d); });
      check(grads.logits[k], [k](TrainState& t, double d) { t.logits[k] += d; });
    }
  }
}

TEST_CASE("objective and gradient are invariant to a logit shift") {
  constexpr std::size_t n = 8;
  NlinCoeffs coeffs;
  coeffs.sigma2_ase = 0.05;
  TrainState s = random_state(n, 31, 0.8);
  std::mt19937_64 rng(2);
  const auto batch = draw_minibatch(n, 256, rng);
  TrainState shifted = s;
  for (auto& l : shifted.logits) l += 3.5;
  CHECK(objective(s, coeffs, 1.0, batch) ==
        doctest::Approx(objective(shifted, coeffs, 1.0, batch)).epsilon(1e-12));
  const auto grads = backward(s, forward_objective(s, coeffs, 1.0, batch).cache);
  double along_ones = 0.0;
  for (double g : grads.logits) along_ones += g;
  CHECK(std::abs(along_ones) < 1e-8);
}

TEST_CASE("adam_step") {
  TrainState s = random_state(3, 1, 1.0);
  const TrainState before = s;
  Gradients zero{std::vector<cplx>(3, 0.0), std::vector<double>(3, 0.0)};
  adam_step(s, zero, 0.1);
  CHECK(s.raw_points == before.raw_points);
  CHECK(s.logits == before.logits);
  CHECK(s.step == 1);

  // Constant gradient: every update approaches -lr * sign(g).
  TrainState c = random_state(1, 2, 1.0);
  Gradients constant{{cplx(0.3, -2.0)}, {5.0}};
  for (int i = 0; i < 2000; ++i) {
    const TrainState prev = c;
    adam_step(c, constant, 0.01);
    if (i == 1999) {
      CHECK((c.raw_points[0] - prev.raw_points[0]).real() ==
            doctest::Approx(-0.01).epsilon(1e-5));
      CHECK((c.raw_points[0] - prev.raw_points[0]).imag() ==
            doctest::Approx(0.01).epsilon(1e-5));
      CHECK(c.logits[0] - prev.logits[0] == doctest::Approx(-0.01).epsilon(1e-5));
    }
  }

  // f(x) = x^2 at x = 1: m_hat = g = 2, v_hat = g^2 = 4, step = lr * 2 / 2.
  TrainState q = random_state(1, 3, 1.0);
  q.logits[0] = 1.0;
  Gradients grad{{cplx(0, 0)}, {2.0 * q.logits[0]}};
  adam_step(q, grad, 0.1);
  CHECK(q.logits[0] == doctest::Approx(0.9).epsilon(1e-9));

  Gradients wrong{std::vector<cplx>(2), std::vector<double>(2)};
  CHECK_THROWS_AS(adam_step(q, wrong, 0.1), ValidationError);
}

TEST_CASE("straight-through rows are hard forward") {
  constexpr std::size_t n = 8;
  const NlinCoeffs coeffs = nonlinear_coeffs();
  TrainState s = random_state(n, 21, 0.3);
  std::mt19937_64 rng(8);
  auto hard = draw_minibatch(n, 256, rng);
  hard.hard = true;
  auto st = hard;
  st.hard = false;
  st.straight_through = true;

  const auto fh = forward_objective(s, coeffs, 4e-3, hard);
  const auto fs = forward_objective(s, coeffs, 4e-3, st);
  CHECK(fs.objective_bits == fh.objective_bits);
  CHECK(fs.cache.soft == fh.cache.soft);

  const auto gh = backward(s, fh.cache);
  const auto gs = backward(s, fs.cache);
  double sum = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(std::abs(gs.points[k] - gh.points[k]) < 1e-12);
    CHECK(std::isfinite(gs.logits[k]));
    sum += gs.logits[k];
    norm += std::abs(gs.logits[k] - gh.logits[k]);
  }
  // The relaxed rows add a sampling path into the logits.
  CHECK(norm > 1e-6);
  CHECK(std::abs(sum) < 1e-8);
}

TEST_CASE("training on a linear channel") {
  TrainConfig cfg;
  cfg.iterations = 400;
  cfg.batch_size = 512;
  cfg.tau_decay = 1e-2;
  cfg.power_w = 1.0;
  cfg.seed = 4;
  const auto qam = make_qam(16);

  SUBCASE("high SNR keeps the probabilities near uniform") {
    const auto r = train(cfg, awgn_coeffs(1e-3), qam);
    CHECK_FALSE(r.diverged);
    CHECK(entropy_bits(r.constellation.probs()) >= 3.9);
    CHECK(r.history.size() == 9);
  }

  SUBCASE("moderate SNR does not lose to uniform") {
    const double sigma2 = std::pow(10.0, -0.8);
    const auto r = train(cfg, awgn_coeffs(sigma2), qam);
    CHECK(mi_exact_awgn(r.constellation, sigma2) >= mi_exact_awgn(qam, sigma2) - 1e-3);
    const auto m = standardized_moments(r.constellation);
    CHECK(m.mu6 >= m.mu4 * m.mu4);
  }
}

TEST_CASE("temperature schedule and config validation") {
  TrainConfig cfg;
  CHECK(cfg.temperature_at(0) == doctest::Approx(cfg.tau0));
  CHECK(cfg.temperature_at(1'000'000) == doctest::Approx(cfg.tau_min));
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "shaping/errors.hpp"
#include "shaping/metrics.hpp"
#include "shaping/nlin_channel.hpp"
#include "shaping/quadrature.hpp"

using namespace shaping;

namespace {

struct AwgnData {
  std::vector<std::size_t> tx;
  std::vector<cplx> rx;
};

AwgnData awgn_data(const Constellation& c, double sigma2, std::size_t n,
                   std::uint64_t seed) {
  AwgnData d;
  d.tx = sample_sequence(c, n, seed);
  d.rx = channel_apply(symbols_from_indices(c, d.tx), sigma2, seed + 1000);
  return d;
}

double snr_to_sigma2(double db) { return std::pow(10.0, -db / 10.0); }

// Brute-force MI on a uniform 2D grid spanning +-6 sigma beyond the points.
double grid_mi(const Constellation& c, double sigma2, int points) {
  double lo = 0.0, hi = 0.0;
  for (const auto& s : c.points())
    lo = std::min({lo, s.real(), s.imag()}), hi = std::max({hi, s.real(), s.imag()});
  const double sigma = std::sqrt(sigma2 / 2.0);
  lo -= 6.0 * sigma;
  hi += 6.0 * sigma;
  const double step = (hi - lo) / (points - 1);
  const double norm = 1.0 / (std::numbers::pi * sigma2);
  double acc = 0.0;
  std::vector<double> f(c.size());
  for (int a = 0; a < points; ++a)
    for (int b = 0; b < points; ++b) {
      const cplx y(lo + a * step, lo + b * step);
      double mix = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) {
        f[k] = norm * std::exp(-std::norm(y - c.point(k)) / sigma2);
        mix += c.prob(k) * f[k];
      }
      for (std::size_t k = 0; k < c.size(); ++k)
        if (f[k] > 0.0) acc += c.prob(k) * f[k] * std::log2(f[k] / mix);
    }
  return acc * step * step;
}

}  // namespace

TEST_CASE("Gauss-Hermite rule integrates polynomials against exp(-x^2)") {
  const auto rule = gauss_hermite(20);
  double m0 = 0.0, m2 = 0.0, m4 = 0.0, m38 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i], w = rule.weights[i];
    m0 += w;
    m2 += w * x * x;
    m4 += w * std::pow(x, 4);
    m38 += w * std::pow(x, 38);
  }
  const double sp = std::sqrt(std::numbers::pi);
  CHECK(m0 == doctest::Approx(sp).epsilon(1e-13));
  CHECK(m2 == doctest::Approx(sp / 2.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0 * sp / 4.0).epsilon(1e-12));
  // (37)!! sqrt(pi) / 2^19
  double dfact = 1.0;
  for (int k = 37; k > 1; k -= 2) dfact *= k;
  CHECK(m38 == doctest::Approx(dfact * sp / std::pow(2.0, 19)).epsilon(1e-9));

  const auto lag = gauss_laguerre(10);
  double l0 = 0.0, l3 = 0.0;
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
    l0 += lag.weights[i];
    l3 += lag.weights[i] * std::pow(lag.nodes[i], 3);
  }
  CHECK(l0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(l3 == doctest::Approx(6.0).epsilon(1e-11));
}

TEST_CASE("mi_exact_awgn limits") {
  const auto qam16 = make_qam(16);
  CHECK(mi_exact_awgn(qam16, 1e4) < 1e-3);
  CHECK(std::abs(mi_exact_awgn(qam16, 1e-4) - 4.0) < 1e-3);
  const auto mb = maxwell_boltzmann(qam_grid(64), 2.0);
  CHECK(std::abs(mi_exact_awgn(mb, 1e-5) - entropy_bits(mb.probs())) < 1e-3);
  CHECK_THROWS_AS(mi_exact_awgn(qam16, 0.0), ValidationError);
}

TEST_CASE("mi_exact_awgn matches a fine-grid integration for QPSK at 10 dB") {
  const auto qpsk = make_qam(4);
  const double sigma2 = snr_to_sigma2(10.0);
  const double oracle = grid_mi(qpsk, sigma2, 2001);
  CHECK(std::abs(mi_exact_awgn(qpsk, sigma2) - oracle) < 1e-4);
}

TEST_CASE("mi_exact_awgn decreases with the noise variance") {
  const auto c = make_qam(64);
  double previous = 7.0;
  for (double db = 30.0; db >= -5.0; db -= 2.5) {
    const double mi = mi_exact_awgn(c, snr_to_sigma2(db));
    CHECK(mi < previous);
    CHECK(mi >= 0.0);
    previous = mi;
  }
}

TEST_CASE("mi_exact_awgn converges for 256QAM across the operating range") {
  const auto c = make_qam(256);
  for (double db : {10.0, 16.0, 22.0, 28.0}) {
    const double mi = mi_exact_awgn(c, snr_to_sigma2(db));
    CHECK(mi > 0.0);
    CHECK(mi < 8.0);
  }
}

TEST_CASE("mi_monte_carlo agrees with the quadrature oracle") {
  const auto qpsk = make_qam(4);
  const double sigma2 = snr_to_sigma2(3.0);
  const auto d = awgn_data(qpsk, sigma2, 100000, 1);
  const auto est = mi_monte_carlo(d.tx, d.rx, qpsk, sigma2);
  const double exact = mi_exact_awgn(qpsk, sigma2);
  CHECK(std::abs(est.bits - exact) < 3.0 * est.std_error);
  CHECK(est.bits <= 2.0 + 3.0 * est.std_error);
  CHECK(est.clamped == 0);

  SUBCASE("noiseless data gives the entropy") {
    const auto mb = maxwell_boltzmann(qam_grid(16), 1.0);
    const auto tx = sample_sequence(mb, 1000, 3);
    const auto rx = symbols_from_indices(mb, tx);
    CHECK(mi_monte_carlo(tx, rx, mb, 0.0).bits ==
          doctest::Approx(entropy_bits(mb.probs())).epsilon(1e-12));
    CHECK(mi_monte_carlo(tx, rx, mb, 1e-8).bits ==
          doctest::Approx(entropy_bits(mb.probs())).epsilon(1e-9));
  }
  SUBCASE("a sent symbol with zero posterior is clamped and flagged") {
    std::vector<std::size_t> tx{0, 1};
    std::vector<cplx> rx{qpsk.point(0), qpsk.point(0)};
    const auto est0 = mi_monte_carlo(tx, rx, qpsk, 0.0);
    CHECK(est0.clamped == 1);
    CHECK(std::isfinite(est0.bits));
  }
  SUBCASE("length mismatch") {
    std::vector<std::size_t> tx{0, 1};
    std::vector<cplx> rx{qpsk.point(0)};
    CHECK_THROWS_AS(mi_monte_carlo(tx, rx, qpsk, 0.1), ValidationError);
  }
}

TEST_CASE("mi_kde on synthetic AWGN data") {
  const auto qam16 = make_qam(16);
  const double sigma2 = snr_to_sigma2(12.0);
  const auto d = awgn_data(qam16, sigma2, 100000, 7);
  const auto est = mi_kde(d.tx, d.rx, qam16);
  const double exact = mi_exact_awgn(qam16, sigma2);
  CHECK(std::abs(est.bits - exact) < 0.05);
  CHECK(est.bits <= 4.0);
  CHECK(est.warnings.empty());

  SUBCASE("joint rotation of constellation and samples") {
    const cplx rot = std::polar(1.0, 0.9);
    std::vector<cplx> pts(qam16.points().begin(), qam16.points().end());
    for (auto& p : pts) p *= rot;
    const Constellation rotated(
        pts, std::vector<double>(qam16.probs().begin(), qam16.probs().end()));
    std::vector<cplx> rx = d.rx;
    for (auto& y : rx) y *= rot;
    CHECK(mi_kde(d.tx, rx, rotated).bits == doctest::Approx(est.bits).epsilon(1e-9));
  }
}

TEST_CASE("mi_kde near-noiseless and degenerate cases") {
  const auto mb = maxwell_boltzmann(qam_grid(16), 0.1);
  const auto d = awgn_data(mb, 1e-6, 20000, 9);
  const auto est = mi_kde(d.tx, d.rx, mb);
  CHECK(std::abs(est.bits - entropy_bits(mb.probs())) < 0.05);

  SUBCASE("a point never sent is excluded with a warning") {
    auto tx = d.tx;
    for (auto& k : tx)
      if (k == 5) k = 6;
    const auto e = mi_kde(tx, d.rx, mb);
    REQUIRE(e.excluded_points.size() == 1);
    CHECK(e.excluded_points[0] == 5);
    CHECK(e.warnings.size() == 1);
  }
  SUBCASE("too little data") {
    std::vector<std::size_t> tx{0, 1};
    std::vector<cplx> rx{0.0, 1.0};
    CHECK_THROWS_AS(mi_kde(tx, rx, mb), ValidationError);
  }
}

TEST_CASE("report_4d") {
  CHECK(report_4d(4.0, 4.0) == 8.0);
  CHECK(report_4d(0.0, 0.0) == 0.0);
}

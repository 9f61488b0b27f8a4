#include "shaping/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "shaping/errors.hpp"

namespace shaping {

namespace {

// Softmax in place; returns log-sum-exp of the input. With `prune`, entries
// more than e^40 below the largest are set to zero without calling exp.
double softmax_inplace(std::span<double> v, bool prune = false) {
  const double top = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (auto& x : v) {
    x = !prune || x - top > -40.0 ? std::exp(x - top) : 0.0;
    acc += x;
  }
  for (auto& x : v) x /= acc;
  return top + std::log(acc);
}

}  // namespace

TrainState TrainState::from_constellation(const Constellation& c,
                                          double temperature) {
  TrainState s;
  s.raw_points.assign(c.points().begin(), c.points().end());
  s.logits.resize(c.size());
  // Zero-probability points start far down the softmax but stay trainable.
  for (std::size_t k = 0; k < c.size(); ++k)
    s.logits[k] = std::log(std::max(c.prob(k), 1e-30));
  s.adam_m.assign(3 * c.size(), 0.0);
  s.adam_v.assign(3 * c.size(), 0.0);
  s.temperature = temperature;
  return s;
}

std::vector<double> TrainState::probabilities() const {
  std::vector<double> p(logits);
  softmax_inplace(p);
  return p;
}

Constellation TrainState::constellation() const {
  return normalize_power(raw_points, probabilities());
}

double sample_gumbel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u;
  do {
    u = uniform(rng);
  } while (u <= 0.0 || u >= 1.0);
  return -std::log(-std::log(u));
}

Minibatch draw_minibatch(std::size_t categories, std::size_t rows,
                         std::mt19937_64& rng) {
  Minibatch b;
  b.rows = rows;
  b.categories = categories;
  b.gumbel.resize(rows * categories);
  for (auto& g : b.gumbel) g = sample_gumbel(rng);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  b.noise.resize(rows);
  for (auto& n : b.noise) {
    const double re = normal(rng);
    const double im = normal(rng);
    n = cplx(re, im);
  }
  return b;
}

void gumbel_softmax_rows(std::span<const double> logits,
                         std::span<const double> gumbel, double tau,
                         std::span<double> rows) {
  if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
  const std::size_t n = logits.size();
  const std::size_t count = gumbel.size() / n;
  for (std::size_t i = 0; i < count; ++i) {
    auto row = rows.subspan(i * n, n);
    for (std::size_t k = 0; k < n; ++k)
      row[k] = (logits[k] + gumbel[i * n + k]) / tau;
    softmax_inplace(row, true);
  }
}

std::vector<double> gumbel_softmax_sample(std::span<const double> logits,
                                          double tau, std::size_t batch_size,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> gumbel(batch_size * logits.size());
  for (auto& g : gumbel) g = sample_gumbel(rng);
  std::vector<double> rows(gumbel.size());
  gumbel_softmax_rows(logits, gumbel, tau, rows);
  return rows;
}

ForwardResult forward_objective(const TrainState& state,
                                const NlinCoeffs& coeffs, double power_w,
                                const Minibatch& batch) {
  const std::size_t n = state.size();
  if (batch.categories != n || state.logits.size() != n)
    throw ValidationError("minibatch and state sizes disagree");
  if (batch.rows == 0) throw ValidationError("empty minibatch");

  ForwardCache c;
  c.rows = batch.rows;
  c.n = n;
  c.tau = state.temperature;
  c.power_w = power_w;
  c.chi = coeffs.chi;

  c.probs = state.logits;
  const double lse = softmax_inplace(c.probs);
  c.log_probs.resize(n);
  for (std::size_t k = 0; k < n; ++k) c.log_probs[k] = state.logits[k] - lse;

  c.raw_power = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    c.raw_power += c.probs[k] * std::norm(state.raw_points[k]);
  if (!(c.raw_power > 0.0))
    throw DegenerateConstellationError("trainable points collapsed to zero");
  const double scale = 1.0 / std::sqrt(c.raw_power);
  c.points.resize(n);
  for (std::size_t k = 0; k < n; ++k) c.points[k] = scale * state.raw_points[k];

  c.mu4 = c.mu6 = c.entropy_nats = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r2 = std::norm(c.points[k]);
    c.mu4 += c.probs[k] * r2 * r2;
    c.mu6 += c.probs[k] * r2 * r2 * r2;
    c.entropy_nats -= c.probs[k] * c.log_probs[k];
  }
  c.sigma2 = normalized_variance(coeffs, power_w, c.mu4, c.mu6);
  if (!(c.sigma2 > 0.0)) throw NumericalError("channel variance must be positive");

  c.soft.resize(c.rows * n);
  if (batch.straight_through) {
    c.relaxed.resize(c.rows * n);
    gumbel_softmax_rows(state.logits, batch.gumbel, c.tau, c.relaxed);
  }
  if (batch.hard || batch.straight_through) {
    std::fill(c.soft.begin(), c.soft.end(), 0.0);
    for (std::size_t i = 0; i < c.rows; ++i) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < n; ++k)
        if (state.logits[k] + batch.gumbel[i * n + k] >
            state.logits[arg] + batch.gumbel[i * n + arg])
          arg = k;
      c.soft[i * n + arg] = 1.0;
    }
  } else {
    gumbel_softmax_rows(state.logits, batch.gumbel, c.tau, c.soft);
  }

  c.noise = batch.noise;
  c.received.resize(c.rows);
  c.log_post.resize(c.rows * n);
  const double noise_scale = std::sqrt(c.sigma2);
  double cross_entropy = 0.0;
  for (std::size_t i = 0; i < c.rows; ++i) {
    const double* t = &c.soft[i * n];
    cplx x = 0.0;
    for (std::size_t k = 0; k < n; ++k) x += t[k] * c.points[k];
    const cplx y = x + noise_scale * c.noise[i];
    c.received[i] = y;
    std::span<double> lp(&c.log_post[i * n], n);
    log_posterior(y, c.points, c.log_probs, c.sigma2, lp);
    double row = 0.0;
    for (std::size_t k = 0; k < n; ++k) row -= t[k] * lp[k];
    cross_entropy += row;
  }
  cross_entropy /= static_cast<double>(c.rows);

  const double objective = (c.entropy_nats - cross_entropy) / std::numbers::ln2;
  if (!std::isfinite(objective))
    throw NumericalError(
        "non-finite training objective (probabilities may have collapsed)");
  return {objective, std::move(c)};
}

Gradients backward(const TrainState& state, const ForwardCache& c) {
  const std::size_t n = c.n;
  const double inv_rows = 1.0 / static_cast<double>(c.rows);
  const double w = 1.0 / c.sigma2;
  const double noise_scale = std::sqrt(c.sigma2);

  // Adjoints of the objective J in nats; negated and converted at the end.
  std::vector<cplx> g_points(n, 0.0);   // normalized points
  std::vector<double> g_probs(n, 0.0);
  std::vector<double> g_log_probs(n, 0.0);
  std::vector<double> g_logits(n, 0.0);
  double g_w = 0.0;
  double g_sigma2 = 0.0;
  std::vector<double> g_soft(n);

  for (std::size_t i = 0; i < c.rows; ++i) {
    const double* t = &c.soft[i * n];
    const double* lp = &c.log_post[i * n];
    const cplx y = c.received[i];
    double t_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) t_sum += t[k];

    cplx g_y = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      // a_ik = log p_k - w |y - s_k|^2, J += t_ik (a_ik - lse_i) / B
      const double q = lp[k] > -40.0 ? std::exp(lp[k]) : 0.0;
      const double g_a = inv_rows * (t[k] - t_sum * q);
      const cplx d = y - c.points[k];
      g_log_probs[k] += g_a;
      g_w -= g_a * std::norm(d);
      g_y -= 2.0 * w * g_a * d;
      g_points[k] += 2.0 * w * g_a * d;
      g_soft[k] = inv_rows * lp[k];
    }

    // y = sum_k t_ik s_k + sqrt(sigma2) n_i
    g_sigma2 += (g_y.real() * c.noise[i].real() + g_y.imag() * c.noise[i].imag()) /
                (2.0 * noise_scale);
    double dot = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      g_soft[k] += g_y.real() * c.points[k].real() + g_y.imag() * c.points[k].imag();
      g_points[k] += t[k] * g_y;
      dot += t[k] * g_soft[k];
    }
    // t_i = softmax((logits + g_i) / tau); straight-through rows take the
    // Jacobian of the relaxed row at the hard row's adjoint.
    if (!c.relaxed.empty()) {
      const double* r = &c.relaxed[i * n];
      dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += r[k] * g_soft[k];
      for (std::size_t k = 0; k < n; ++k) g_logits[k] += r[k] * (g_soft[k] - dot) / c.tau;
    } else {
      for (std::size_t k = 0; k < n; ++k) g_logits[k] += t[k] * (g_soft[k] - dot) / c.tau;
    }
  }

  g_sigma2 -= g_w * w * w;

  // sigma2 = (sigma2_ase + P^3 f(mu4, mu6)) / P
  const double p2 = c.power_w * c.power_w;
  const double g_mu4 = g_sigma2 * p2 *
                       (c.chi[1] - 9.0 * c.chi[2] + 2.0 * c.chi[3] * (c.mu4 - 2.0));
  const double g_mu6 = g_sigma2 * p2 * c.chi[2];

  for (std::size_t k = 0; k < n; ++k) {
    const double r2 = std::norm(c.points[k]);
    g_probs[k] += g_mu4 * r2 * r2 + g_mu6 * r2 * r2 * r2;
    g_points[k] += (4.0 * g_mu4 * r2 + 6.0 * g_mu6 * r2 * r2) * c.probs[k] *
                   c.points[k];
    // H = -sum p log p
    g_probs[k] -= c.log_probs[k];
    g_log_probs[k] -= c.probs[k];
  }

  // s_k = r_k / sqrt(sum_j p_j |r_j|^2)
  const double inv_sqrt = 1.0 / std::sqrt(c.raw_power);
  Gradients out;
  out.points.resize(n);
  double g_raw_power = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const cplx r = state.raw_points[k];
    out.points[k] = g_points[k] * inv_sqrt;
    g_raw_power += g_points[k].real() * r.real() + g_points[k].imag() * r.imag();
  }
  g_raw_power *= -0.5 * inv_sqrt / c.raw_power;
  for (std::size_t k = 0; k < n; ++k) {
    g_probs[k] += g_raw_power * std::norm(state.raw_points[k]);
    out.points[k] += 2.0 * g_raw_power * c.probs[k] * state.raw_points[k];
  }

  // log p = logits - lse(logits); p = softmax(logits)
  double sum_g_log = 0.0, dot_p = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum_g_log += g_log_probs[k];
    dot_p += c.probs[k] * g_probs[k];
  }
  out.logits.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    g_logits[k] += g_log_probs[k] - c.probs[k] * sum_g_log;
    g_logits[k] += c.probs[k] * (g_probs[k] - dot_p);
    out.logits[k] = g_logits[k];
  }

  const double to_loss = -1.0 / std::numbers::ln2;
  for (auto& g : out.points) g *= to_loss;
  for (auto& g : out.logits) g *= to_loss;
  return out;
}

void adam_step(TrainState& state, const Gradients& grads, double learning_rate,
               const AdamParams& params) {
  const std::size_t n = state.size();
  if (grads.points.size() != n || grads.logits.size() != n ||
      state.adam_m.size() != 3 * n || state.adam_v.size() != 3 * n)
    throw ValidationError("gradient and state shapes disagree");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(params.beta1, t);
  const double corr2 = 1.0 - std::pow(params.beta2, t);
  auto update = [&](double& x, double g, std::size_t slot) {
    double& m = state.adam_m[slot];
    double& v = state.adam_v[slot];
    m = params.beta1 * m + (1.0 - params.beta1) * g;
    v = params.beta2 * v + (1.0 - params.beta2) * g * g;
    x -= learning_rate * (m / corr1) / (std::sqrt(v / corr2) + params.epsilon);
  };
  for (std::size_t k = 0; k < n; ++k) {
    double re = state.raw_points[k].real();
    double im = state.raw_points[k].imag();
    update(re, grads.points[k].real(), k);
    update(im, grads.points[k].imag(), n + k);
    state.raw_points[k] = cplx(re, im);
    update(state.logits[k], grads.logits[k], 2 * n + k);
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(tau_min > 0.0) || !(tau0 > 0.0))
    throw ValidationError("temperatures must be > 0");
  if (!(tau_decay >= 0.0)) throw ValidationError("tau_decay must be >= 0");
  if (!(power_w > 0.0)) throw ValidationError("training power must be > 0");
  if (!(smoothing > 0.0 && smoothing <= 1.0))
    throw ValidationError("smoothing must lie in (0, 1]");
}

double TrainConfig::temperature_at(std::size_t step) const {
  return std::max(tau_min, tau0 * std::exp(-tau_decay * static_cast<double>(step)));
}

TrainResult train(const TrainConfig& config, const NlinCoeffs& coeffs,
                  const Constellation& init) {
  config.validate();
  TrainState state = TrainState::from_constellation(init, config.tau0);
  std::mt19937_64 rng(config.seed);

  std::vector<HistoryEntry> history;
  Constellation best = init;
  double best_smoothed = -std::numeric_limits<double>::infinity();
  double smoothed = 0.0;
  bool have_smoothed = false;
  bool diverged = false;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    state.temperature = config.temperature_at(it);
    Minibatch batch = draw_minibatch(state.size(), config.batch_size, rng);
    batch.straight_through = config.straight_through;
    ForwardResult fwd{0.0, {}};
    try {
      fwd = forward_objective(state, coeffs, config.power_w, batch);
    } catch (const NumericalError&) {
      diverged = true;
      break;
    }
    smoothed = have_smoothed ? (1.0 - config.smoothing) * smoothed +
                                   config.smoothing * fwd.objective_bits
                             : fwd.objective_bits;
    have_smoothed = true;
    if (smoothed > best_smoothed) {
      best_smoothed = smoothed;
      best = state.constellation();
    }
    if (it % config.log_every == 0 || it + 1 == config.iterations)
      history.push_back({static_cast<std::int64_t>(it), fwd.objective_bits,
                         fwd.cache.entropy_nats / std::numbers::ln2,
                         fwd.cache.mu4, fwd.cache.mu6, state.temperature});

    Gradients grads = backward(state, fwd.cache);
    if (!config.train_points) std::fill(grads.points.begin(), grads.points.end(), 0.0);
    if (!config.train_probs) std::fill(grads.logits.begin(), grads.logits.end(), 0.0);
    adam_step(state, grads, config.learning_rate);
  }
  return {best, std::move(history), best_smoothed, diverged};
}

void write_history_csv(std::ostream& out, std::span<const HistoryEntry> history) {
  out << "step,objective_bits,entropy_bits,mu4,mu6,temperature\n";
  out.precision(10);
  for (const auto& h : history)
    out << h.step << ',' << h.objective_bits << ',' << h.entropy_bits << ','
        << h.mu4 << ',' << h.mu6 << ',' << h.temperature << '\n';
}

}  // namespace shaping

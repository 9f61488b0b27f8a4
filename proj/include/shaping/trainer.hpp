#ifndef SHAPING_TRAINER_HPP
#define SHAPING_TRAINER_HPP

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "shaping/constellation.hpp"
#include "shaping/nlin_channel.hpp"

namespace shaping {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Trainable transmitter: unnormalized point coordinates and logits.
/// The effective constellation is normalize_power(raw_points, softmax(logits)),
/// so the unit-power constraint holds exactly for any parameter values.
struct TrainState {
  std::vector<cplx> raw_points;
  std::vector<double> logits;
  // Adam moments, laid out as [re(points) | im(points) | logits].
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step = 0;
  double temperature = 1.0;

  static TrainState from_constellation(const Constellation& c,
                                       double temperature = 1.0);
  std::size_t size() const { return raw_points.size(); }
  std::vector<double> probabilities() const;
  Constellation constellation() const;
};

/// Gradients in the same parameterization as TrainState. A complex entry
/// holds d/d(re) + i d/d(im).
struct Gradients {
  std::vector<cplx> points;
  std::vector<double> logits;
};

/// Random draws for one minibatch: Gumbel(0,1) noise per (row, category)
/// and unit-variance circular Gaussian channel noise per row. With `hard`
/// set, rows are the exact one-hot argmax(logits + g) (categorical samples)
/// instead of the relaxed softmax.
struct Minibatch {
  std::size_t rows = 0;
  std::size_t categories = 0;
  bool hard = false;
  // Hard rows forward, relaxed-row Jacobian backward (biased estimator).
  bool straight_through = false;
  std::vector<double> gumbel;  // rows x categories, row-major
  std::vector<cplx> noise;     // rows, E|n|^2 = 1
};

Minibatch draw_minibatch(std::size_t categories, std::size_t rows,
                         std::mt19937_64& rng);

/// Gumbel(0,1) variate via -log(-log U); U in {0, 1} is redrawn.
double sample_gumbel(std::mt19937_64& rng);

/// Relaxed one-hot rows softmax((logits + g) / tau), row-major
/// batch_size x N.
std::vector<double> gumbel_softmax_sample(std::span<const double> logits,
                                          double tau, std::size_t batch_size,
                                          std::uint64_t seed);
void gumbel_softmax_rows(std::span<const double> logits,
                         std::span<const double> gumbel, double tau,
                         std::span<double> rows);

/// Intermediates of forward_objective retained for backward().
struct ForwardCache {
  std::size_t rows = 0;
  std::size_t n = 0;
  double tau = 1.0;
  double power_w = 0.0;
  std::array<double, 4> chi{};
  std::vector<double> probs;
  std::vector<double> log_probs;
  double raw_power = 0.0;
  std::vector<cplx> points;  // normalized
  double mu4 = 0.0, mu6 = 0.0;
  double entropy_nats = 0.0;
  double sigma2 = 0.0;  // normalized channel variance
  std::vector<double> soft;     // rows used in the forward pass
  std::vector<double> relaxed;  // straight-through only: relaxed rows
  std::vector<cplx> noise;
  std::vector<cplx> received;
  std::vector<double> log_post;  // rows x n
};

struct ForwardResult {
  double objective_bits;  // H(P_S) - mean cross entropy, bits/2D
  ForwardCache cache;
};

/// Differentiable surrogate of the end-to-end MI through the NLIN channel
/// at per-polarization power power_w. Throws NumericalError if the objective
/// is not finite.
ForwardResult forward_objective(const TrainState& state,
                                const NlinCoeffs& coeffs, double power_w,
                                const Minibatch& batch);

/// Exact reverse-mode gradient of -objective_bits.
Gradients backward(const TrainState& state, const ForwardCache& cache);

/// One bias-corrected Adam update (descent on the given gradients).
void adam_step(TrainState& state, const Gradients& grads, double learning_rate,
               const AdamParams& params = {});

struct TrainConfig {
  std::size_t batch_size = 1024;
  double learning_rate = 2e-3;
  std::size_t iterations = 2000;
  double tau0 = 1.0;
  double tau_min = 0.1;
  double tau_decay = 2.5e-3;
  std::uint64_t seed = 1;
  double power_w = 1e-3;  // per polarization
  bool train_points = true;
  bool train_probs = true;
  bool straight_through = true;
  double smoothing = 0.01;  // EMA weight for the best-objective tracker
  std::size_t log_every = 50;

  void validate() const;
  double temperature_at(std::size_t step) const;
};

struct HistoryEntry {
  std::int64_t step;
  double objective_bits;
  double entropy_bits;
  double mu4;
  double mu6;
  double temperature;
};

struct TrainResult {
  Constellation constellation;
  std::vector<HistoryEntry> history;
  double best_smoothed_objective;
  bool diverged = false;
};

TrainResult train(const TrainConfig& config, const NlinCoeffs& coeffs,
                  const Constellation& init);

void write_history_csv(std::ostream& out, std::span<const HistoryEntry> history);

}  // namespace shaping

#endif  // SHAPING_TRAINER_HPP

#include "shaping/ssfm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "shaping/errors.hpp"
#include "shaping/fft.hpp"
#include "shaping/nlin_channel.hpp"

namespace shaping {

namespace {

constexpr double kManakovFactor = 8.0 / 9.0;

// Length over which the midpoint intensity must act so that a step of length
// h with loss alpha accumulates the exact CW nonlinear phase.
double midpoint_effective_length(double h, double alpha) {
  if (alpha == 0.0) return h;
  return 2.0 * std::sinh(0.5 * alpha * h) / alpha;
}

std::vector<double> step_schedule(const LinkParams& link, const SsfmConfig& cfg,
                                  double launch_power_w, double gamma_eff,
                                  double* max_phase) {
  const double length = link.span_length_km;
  const double alpha = link.alpha_linear_per_km();
  // CW phase gamma P exp(-alpha z) (1 - exp(-alpha h)) / alpha of one step.
  auto step_phase = [&](double z, double h) {
    const double leff = alpha == 0.0 ? h : -std::expm1(-alpha * h) / alpha;
    return gamma_eff * launch_power_w * std::exp(-alpha * z) * leff;
  };
  std::vector<double> steps;
  *max_phase = 0.0;
  if (length == 0.0) return steps;

  if (!cfg.adaptive) {
    // Equal steps no longer than step_km.
    const auto count = static_cast<std::size_t>(std::ceil(length / cfg.step_km - 1e-9));
    const double h = length / static_cast<double>(count);
    // Power decays along the span, so the first step carries the most phase.
    *max_phase = step_phase(0.0, h);
    if (*max_phase > cfg.max_nonlinear_phase * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "nonlinear phase per step " << *max_phase << " rad exceeds the cap "
          << cfg.max_nonlinear_phase
          << " rad; reduce step_km or enable adaptive stepping";
      throw ValidationError(msg.str());
    }
    steps.assign(count, h);
    return steps;
  }

  double z = 0.0;
  while (length - z > 1e-9 * length) {
    const double remaining = length - z;
    double h = remaining;
    if (gamma_eff * launch_power_w > 0.0) {
      while (step_phase(z, h) > cfg.max_nonlinear_phase)
        h = std::min(0.99 * h, cfg.max_nonlinear_phase /
                                   (gamma_eff * launch_power_w * std::exp(-alpha * z)));
    }
    // Avoid leaving a sliver at the end of the span.
    if (remaining - h < 1e-6 * length) h = remaining;
    *max_phase = std::max(*max_phase, step_phase(z, h));
    steps.push_back(h);
    z += h;
  }
  return steps;
}

// exp(i phi). Per-step phases are small, where a short Taylor series is
// accurate to rounding and much cheaper than sin and cos.
cplx unit_phasor(double phi) {
  if (std::abs(phi) > 0.05) return {std::cos(phi), std::sin(phi)};
  const double p2 = phi * phi;
  const double c = 1.0 - p2 / 2.0 * (1.0 - p2 / 12.0 * (1.0 - p2 / 30.0 * (1.0 - p2 / 56.0)));
  const double s = phi * (1.0 - p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0 * (1.0 - p2 / 72.0))));
  return {c, s};
}

// exp((-alpha/2 + i beta2/2 omega^2) h) per bin.
void linear_operator(std::span<const double> omega, double alpha, double beta2,
                     double h, std::vector<cplx>& out) {
  out.resize(omega.size());
  const double attenuation = std::exp(-0.5 * alpha * h);
  for (std::size_t k = 0; k < omega.size(); ++k)
    out[k] = attenuation * std::polar(1.0, 0.5 * beta2 * omega[k] * omega[k] * h);
}

}  // namespace

void FieldGrid::validate() const {
  if (x.empty() || x.size() != y.size())
    throw ValidationError("field polarizations must be nonempty and equal length");
  if (!std::has_single_bit(x.size()))
    throw ValidationError("field length must be a power of two");
  if (!(sample_rate_ghz > 0.0))
    throw ValidationError("sample rate must be positive");
}

double FieldGrid::total_power() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::norm(x[i]) + std::norm(y[i]);
  return acc / static_cast<double>(x.size());
}

void SsfmConfig::validate() const {
  if (samples_per_symbol < 2)
    throw ValidationError("samples_per_symbol must be >= 2");
  if (!(step_km > 0.0)) throw ValidationError("step_km must be positive");
  if (!(max_nonlinear_phase > 0.0))
    throw ValidationError("max_nonlinear_phase must be positive");
}

std::vector<double> rrc_response(std::size_t n, double sample_rate_ghz,
                                 double symbol_rate_gbd, double rolloff) {
  const double df = sample_rate_ghz / static_cast<double>(n);
  const double inner = (1.0 - rolloff) * symbol_rate_gbd / 2.0;
  const double outer = (1.0 + rolloff) * symbol_rate_gbd / 2.0;
  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double idx = k < (n + 1) / 2 ? static_cast<double>(k)
                                       : static_cast<double>(k) - static_cast<double>(n);
    const double f = std::abs(idx * df);
    double rc;
    if (f <= inner)
      rc = 1.0;
    else if (f < outer)
      rc = 0.5 * (1.0 + std::cos(std::numbers::pi / (rolloff * symbol_rate_gbd) *
                                 (f - inner)));
    else
      rc = 0.0;
    h[k] = std::sqrt(rc);
  }
  return h;
}

FieldGrid rrc_modulate(std::span<const cplx> sym_x, std::span<const cplx> sym_y,
                       const LinkParams& link, double total_power_w,
                       const SsfmConfig& cfg) {
  link.validate();
  cfg.validate();
  if (sym_x.size() != sym_y.size() || sym_x.empty())
    throw ValidationError("polarization symbol streams must be nonempty and equal");
  if (!(total_power_w >= 0.0)) throw ValidationError("launch power must be >= 0");
  const auto sps = static_cast<std::size_t>(cfg.samples_per_symbol);
  if (static_cast<double>(sps) < 1.0 + link.rolloff)
    throw ValidationError("samples_per_symbol below 1 + rolloff aliases the RRC band");

  FieldGrid field;
  field.sample_rate_ghz = link.symbol_rate_gbd * static_cast<double>(sps);
  const std::size_t n = sym_x.size() * sps;
  field.x.assign(n, 0.0);
  field.y.assign(n, 0.0);
  for (std::size_t i = 0; i < sym_x.size(); ++i) {
    field.x[i * sps] = sym_x[i];
    field.y[i * sps] = sym_y[i];
  }
  field.validate();

  // Zero insertion leaves power E|a|^2 / sps and the RRC passes a 1 / sps
  // fraction of it, so this amplitude yields P / 2 per polarization.
  const double amplitude = static_cast<double>(sps) * std::sqrt(total_power_w / 2.0);
  const auto h = rrc_response(n, field.sample_rate_ghz, link.symbol_rate_gbd,
                              link.rolloff);
  Fft fft(n);
  for (auto* pol : {&field.x, &field.y}) {
    fft.forward(*pol);
    for (std::size_t k = 0; k < n; ++k) (*pol)[k] *= amplitude * h[k];
    fft.inverse(*pol);
  }
  return field;
}

FieldGrid ssfm_propagate(const FieldGrid& input, const LinkParams& link,
                         const SsfmConfig& cfg, std::uint64_t noise_seed,
                         PropagationStats* stats) {
  input.validate();
  link.validate();
  cfg.validate();

  const std::size_t n = input.size();
  const double alpha = link.alpha_linear_per_km();
  const double beta2 = link.beta2_ps2_per_km();
  const double gamma_eff = kManakovFactor * link.gamma_per_w_km;
  const double gamma_abs = std::abs(gamma_eff);
  const auto omega = angular_frequencies(n, input.sample_rate_ghz);

  double max_phase = 0.0;
  // Without a nonlinear term the linear operators commute and merge into one.
  const auto steps =
      gamma_eff == 0.0 && link.span_length_km > 0.0
          ? std::vector<double>{link.span_length_km}
          : step_schedule(link, cfg, input.total_power(), gamma_abs, &max_phase);
  if (stats) {
    stats->steps = steps.size();
    stats->max_step_phase = max_phase;
  }

  FieldGrid field = input;
  Fft fft(n);
  std::vector<cplx> op;
  double op_length = -1.0;
  auto apply_linear = [&](double h) {
    if (h != op_length) {
      linear_operator(omega, alpha, beta2, h, op);
      op_length = h;
    }
    for (std::size_t k = 0; k < n; ++k) {
      field.x[k] *= op[k];
      field.y[k] *= op[k];
    }
  };

  fft.forward(field.x);
  fft.forward(field.y);
  double pending = steps.empty() ? 0.0 : 0.5 * steps.front();
  for (std::size_t j = 0; j < steps.size(); ++j) {
    apply_linear(pending);
    fft.inverse(field.x);
    fft.inverse(field.y);
    if (gamma_eff != 0.0) {
      const double leff = midpoint_effective_length(steps[j], alpha);
      for (std::size_t i = 0; i < n; ++i) {
        const double phase =
            gamma_eff * (std::norm(field.x[i]) + std::norm(field.y[i])) * leff;
        const cplx rot = unit_phasor(phase);
        field.x[i] *= rot;
        field.y[i] *= rot;
      }
    }
    fft.forward(field.x);
    fft.forward(field.y);
    pending = 0.5 * steps[j] + (j + 1 < steps.size() ? 0.5 * steps[j + 1] : 0.0);
  }
  if (!steps.empty()) apply_linear(pending);
  fft.inverse(field.x);
  fft.inverse(field.y);

  if (cfg.amplify) {
    const double gain = std::exp(0.5 * alpha * link.span_length_km);
    for (std::size_t i = 0; i < n; ++i) {
      field.x[i] *= gain;
      field.y[i] *= gain;
    }
  }
  if (cfg.add_ase) {
    // White over the simulated band: per-sample variance = PSD * sample rate,
    // so the matched-filter symbol variance equals ase_variance(link).
    const double per_sample = ase_variance(link) * input.sample_rate_ghz /
                              link.symbol_rate_gbd;
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(per_sample / 2.0));
    for (auto* pol : {&field.x, &field.y})
      for (auto& v : *pol) {
        const double re = normal(rng);
        const double im = normal(rng);
        v += cplx(re, im);
      }
  }
  return field;
}

void write_waveform(const FieldGrid& field, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "waveform dumps assume a little-endian host");
  field.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double sample[4] = {field.x[i].real(), field.x[i].imag(),
                              field.y[i].real(), field.y[i].imag()};
    out.write(reinterpret_cast<const char*>(sample), sizeof(sample));
  }
  std::ofstream meta(path + ".json");
  if (!meta) throw Error("cannot open " + path + ".json for writing");
  meta << nlohmann::json{{"sample_rate_ghz", field.sample_rate_ghz},
                         {"n_samples", field.size()},
                         {"layout", "re_x,im_x,re_y,im_y float64 little-endian"}}
              .dump(2)
       << '\n';
}

FieldGrid read_waveform(const std::string& path) {
  std::ifstream meta_in(path + ".json");
  if (!meta_in) throw ValidationError("missing waveform sidecar " + path + ".json");
  nlohmann::json meta;
  meta_in >> meta;
  FieldGrid field;
  field.sample_rate_ghz = meta.at("sample_rate_ghz").get<double>();
  const auto n = meta.at("n_samples").get<std::size_t>();
  field.x.resize(n);
  field.y.resize(n);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open waveform " + path);
  for (std::size_t i = 0; i < n; ++i) {
    double sample[4];
    if (!in.read(reinterpret_cast<char*>(sample), sizeof(sample)))
      throw ValidationError("waveform file shorter than its sidecar length");
    field.x[i] = {sample[0], sample[1]};
    field.y[i] = {sample[2], sample[3]};
  }
  field.validate();
  return field;
}

}  // namespace shaping

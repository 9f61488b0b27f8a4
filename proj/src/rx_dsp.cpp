#include "shaping/rx_dsp.hpp"

#include <cmath>
#include <limits>

#include "shaping/errors.hpp"
#include "shaping/fft.hpp"

namespace shaping {

FieldGrid cd_compensate(const FieldGrid& field, double beta2_ps2_per_km,
                        double length_km) {
  field.validate();
  const std::size_t n = field.size();
  const auto omega = angular_frequencies(n, field.sample_rate_ghz);
  FieldGrid out = field;
  Fft fft(n);
  for (auto* pol : {&out.x, &out.y}) {
    fft.forward(*pol);
    for (std::size_t k = 0; k < n; ++k)
      (*pol)[k] *= std::polar(1.0, -0.5 * beta2_ps2_per_km * omega[k] * omega[k] *
                                       length_km);
    fft.inverse(*pol);
  }
  return out;
}

FieldGrid cd_compensate(const FieldGrid& field, const LinkParams& link) {
  link.validate();
  return cd_compensate(field, link.beta2_ps2_per_km(), link.span_length_km);
}

PolarizationSymbols matched_filter_downsample(const FieldGrid& field,
                                              const LinkParams& link,
                                              int samples_per_symbol) {
  field.validate();
  if (samples_per_symbol < 1 ||
      field.size() % static_cast<std::size_t>(samples_per_symbol) != 0)
    throw ValidationError(
        "symbol timing unknown: field length is not a whole number of symbols");
  const double expected_rate = link.symbol_rate_gbd * samples_per_symbol;
  if (std::abs(field.sample_rate_ghz - expected_rate) > 1e-9 * expected_rate)
    throw ValidationError(
        "symbol timing unknown: sample rate is not samples_per_symbol x symbol rate");

  const std::size_t n = field.size();
  const auto sps = static_cast<std::size_t>(samples_per_symbol);
  const auto h = rrc_response(n, field.sample_rate_ghz, link.symbol_rate_gbd,
                              link.rolloff);
  Fft fft(n);
  PolarizationSymbols out;
  auto filter = [&](const std::vector<cplx>& pol, std::vector<cplx>& dest) {
    std::vector<cplx> work = pol;
    fft.forward(work);
    // Unit passband gain: a stream from rrc_modulate comes back at
    // sqrt(P / 2) amplitude and white noise of PSD N0 at variance N0 R_s.
    for (std::size_t k = 0; k < n; ++k) work[k] *= h[k];
    fft.inverse(work);
    dest.resize(n / sps);
    for (std::size_t i = 0; i < dest.size(); ++i) dest[i] = work[i * sps];
  };
  filter(field.x, out.x);
  filter(field.y, out.y);
  return out;
}

cplx align_factor(std::span<const cplx> rx, std::span<const cplx> tx) {
  if (rx.size() != tx.size()) throw ValidationError("rx and tx lengths differ");
  cplx cross = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    cross += tx[i] * std::conj(rx[i]);
    energy += std::norm(rx[i]);
  }
  if (!(energy > 0.0)) throw ValidationError("cannot align a zero-energy signal");
  return cross / energy;
}

std::vector<cplx> align(std::span<const cplx> rx, std::span<const cplx> tx) {
  const cplx a = align_factor(rx, tx);
  std::vector<cplx> out(rx.size());
  for (std::size_t i = 0; i < rx.size(); ++i) out[i] = a * rx[i];
  return out;
}

double effective_snr_db(std::span<const cplx> aligned_rx,
                        std::span<const cplx> tx) {
  if (aligned_rx.size() != tx.size()) throw ValidationError("lengths differ");
  double signal = 0.0, error = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    signal += std::norm(tx[i]);
    error += std::norm(aligned_rx[i] - tx[i]);
  }
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

double residual_variance(std::span<const cplx> rx, std::span<const cplx> tx) {
  if (rx.size() != tx.size() || rx.empty())
    throw ValidationError("rx and tx must be nonempty and equal length");
  cplx cross = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    cross += std::conj(tx[i]) * rx[i];
    energy += std::norm(tx[i]);
  }
  if (!(energy > 0.0)) throw ValidationError("zero-energy transmit sequence");
  const cplx gain = cross / energy;
  double err = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) err += std::norm(rx[i] - gain * tx[i]);
  // Two complex degrees of freedom are spent on the gain.
  return err / static_cast<double>(rx.size() - 1) / std::norm(gain);
}

}  // namespace shaping

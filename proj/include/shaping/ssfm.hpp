#ifndef SHAPING_SSFM_HPP
#define SHAPING_SSFM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shaping/constellation.hpp"
#include "shaping/link.hpp"

namespace shaping {

/// Dual-polarization complex baseband waveform, samples in sqrt(W).
struct FieldGrid {
  std::vector<cplx> x;
  std::vector<cplx> y;
  double sample_rate_ghz = 0.0;

  std::size_t size() const { return x.size(); }
  // Equal, nonzero power-of-two lengths and a positive sample rate.
  void validate() const;
  // Mean of |x|^2 + |y|^2 over samples (total power, W).
  double total_power() const;
};

struct SsfmConfig {
  int samples_per_symbol = 8;
  double step_km = 0.1;
  bool adaptive = false;
  double max_nonlinear_phase = 3e-3;  // rad per step, at the step's mean power
  bool add_ase = true;
  bool amplify = true;

  void validate() const;
};

/// Root-raised-cosine amplitude response per FFT bin (FFTW order), unit
/// passband gain. Its square is the raised-cosine Nyquist spectrum.
std::vector<double> rrc_response(std::size_t n, double sample_rate_ghz,
                                 double symbol_rate_gbd, double rolloff);

/// Upsamples both symbol streams, shapes them with a frequency-domain RRC
/// filter and scales to a total mean launch power (both polarizations) of
/// total_power_w for unit-power symbols.
FieldGrid rrc_modulate(std::span<const cplx> sym_x, std::span<const cplx> sym_y,
                       const LinkParams& link, double total_power_w,
                       const SsfmConfig& cfg);

struct PropagationStats {
  std::size_t steps = 0;
  double max_step_phase = 0.0;
};

/// Symmetric split-step integration of the Manakov equations over one span,
/// followed by a lumped amplifier that restores the launch power and adds
/// white ASE over the simulation bandwidth.
FieldGrid ssfm_propagate(const FieldGrid& field, const LinkParams& link,
                         const SsfmConfig& cfg, std::uint64_t noise_seed,
                         PropagationStats* stats = nullptr);

/// Writes little-endian float64 (re_x, im_x, re_y, im_y) samples to path and
/// a JSON sidecar at path + ".json".
void write_waveform(const FieldGrid& field, const std::string& path);
FieldGrid read_waveform(const std::string& path);

}  // namespace shaping

#endif  // SHAPING_SSFM_HPP

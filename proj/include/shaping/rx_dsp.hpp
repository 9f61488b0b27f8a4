#ifndef SHAPING_RX_DSP_HPP
#define SHAPING_RX_DSP_HPP

#include <span>
#include <vector>

#include "shaping/constellation.hpp"
#include "shaping/link.hpp"
#include "shaping/ssfm.hpp"

namespace shaping {

/// Removes the accumulated chromatic dispersion exp(i beta2/2 omega^2 L).
FieldGrid cd_compensate(const FieldGrid& field, const LinkParams& link);
FieldGrid cd_compensate(const FieldGrid& field, double beta2_ps2_per_km,
                        double length_km);

struct PolarizationSymbols {
  std::vector<cplx> x;
  std::vector<cplx> y;
};

/// RRC matched filter followed by sampling at the symbol instants. The
/// field length must be a whole number of symbols at samples_per_symbol.
PolarizationSymbols matched_filter_downsample(const FieldGrid& field,
                                              const LinkParams& link,
                                              int samples_per_symbol);

/// Least-squares complex scalar a minimizing sum |x_i - a y_i|^2.
cplx align_factor(std::span<const cplx> rx, std::span<const cplx> tx);
std::vector<cplx> align(std::span<const cplx> rx, std::span<const cplx> tx);

/// 10 log10(sum |x|^2 / sum |y - x|^2); +infinity when y == x.
double effective_snr_db(std::span<const cplx> aligned_rx,
                        std::span<const cplx> tx);

/// Noise variance in transmit-symbol units from the regression of rx on tx
/// (rx = g tx + n): mean |rx - g tx|^2 / |g|^2. Unlike align(), the gain
/// estimate is not shrunk by the noise, so the result is unbiased for noise
/// uncorrelated with tx.
double residual_variance(std::span<const cplx> rx, std::span<const cplx> tx);

/// Drops `guard` entries from both ends.
template <typename T>
std::vector<T> trim_edges(std::span<const T> seq, std::size_t guard) {
  if (seq.size() <= 2 * guard) return {};
  return {seq.begin() + guard, seq.end() - guard};
}

}  // namespace shaping

#endif  // SHAPING_RX_DSP_HPP

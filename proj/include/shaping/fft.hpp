#ifndef SHAPING_FFT_HPP
#define SHAPING_FFT_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace shaping {

/// In-place complex FFT of a fixed length, backed by FFTW.
///
/// Plans use FFTW_ESTIMATE so the algorithm (and therefore every rounding
/// step) is the same on every run. inverse() includes the 1/n factor.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&& other) noexcept;
  Fft& operator=(Fft&& other) noexcept;

  std::size_t size() const { return n_; }
  void forward(std::span<std::complex<double>> data);
  void inverse(std::span<std::complex<double>> data);

 private:
  void release();
  void execute(void* plan, std::span<std::complex<double>> data);

  std::size_t n_ = 0;
  std::complex<double>* buffer_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// Angular frequency of each FFT bin in rad/ps for a sample rate in GHz,
/// in FFTW bin order (0, positive, then negative frequencies).
std::vector<double> angular_frequencies(std::size_t n, double sample_rate_ghz);

}  // namespace shaping

#endif  // SHAPING_FFT_HPP

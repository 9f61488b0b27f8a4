#include "shaping/fft.hpp"

#include <algorithm>
#include <numbers>
#include <utility>

#include <fftw3.h>

#include "shaping/errors.hpp"

namespace shaping {

Fft::Fft(std::size_t n) : n_(n) {
  if (n == 0) throw ValidationError("FFT length must be positive");
  buffer_ = reinterpret_cast<std::complex<double>*>(
      fftw_malloc(sizeof(fftw_complex) * n));
  if (buffer_ == nullptr) throw Error("FFT buffer allocation failed");
  auto* buf = reinterpret_cast<fftw_complex*>(buffer_);
  const int len = static_cast<int>(n);
  forward_plan_ = fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft::~Fft() { release(); }

Fft::Fft(Fft&& other) noexcept
    : n_(std::exchange(other.n_, 0)),
      buffer_(std::exchange(other.buffer_, nullptr)),
      forward_plan_(std::exchange(other.forward_plan_, nullptr)),
      inverse_plan_(std::exchange(other.inverse_plan_, nullptr)) {}

Fft& Fft::operator=(Fft&& other) noexcept {
  if (this != &other) {
    release();
    n_ = std::exchange(other.n_, 0);
    buffer_ = std::exchange(other.buffer_, nullptr);
    forward_plan_ = std::exchange(other.forward_plan_, nullptr);
    inverse_plan_ = std::exchange(other.inverse_plan_, nullptr);
  }
  return *this;
}

void Fft::release() {
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  if (buffer_) fftw_free(buffer_);
  forward_plan_ = inverse_plan_ = nullptr;
  buffer_ = nullptr;
}

void Fft::execute(void* plan, std::span<std::complex<double>> data) {
  if (data.size() != n_) throw ValidationError("FFT length mismatch");
  auto* raw = reinterpret_cast<fftw_complex*>(data.data());
  // The plan runs directly on arrays with the alignment it was made for;
  // anything else goes through the plan's own buffer.
  if (fftw_alignment_of(reinterpret_cast<double*>(raw)) ==
      fftw_alignment_of(reinterpret_cast<double*>(buffer_))) {
    fftw_execute_dft(static_cast<fftw_plan>(plan), raw, raw);
    return;
  }
  std::copy(data.begin(), data.end(), buffer_);
  fftw_execute(static_cast<fftw_plan>(plan));
  std::copy(buffer_, buffer_ + n_, data.begin());
}

void Fft::forward(std::span<std::complex<double>> data) { execute(forward_plan_, data); }

void Fft::inverse(std::span<std::complex<double>> data) {
  execute(inverse_plan_, data);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : data) v *= scale;
}

std::vector<double> angular_frequencies(std::size_t n, double sample_rate_ghz) {
  // GHz -> THz, i.e. cycles per ps.
  const double df = sample_rate_ghz * 1e-3 / static_cast<double>(n);
  std::vector<double> omega(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double idx = k < (n + 1) / 2 ? static_cast<double>(k)
                                       : static_cast<double>(k) - static_cast<double>(n);
    omega[k] = 2.0 * std::numbers::pi * idx * df;
  }
  return omega;
}

}  // namespace shaping

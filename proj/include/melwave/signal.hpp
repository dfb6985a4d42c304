// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "melwave/error.hpp"
#include "melwave/types.hpp"

namespace melwave {

enum class WindowKind { kPeriodicHann, kRectangular };

const char* window_kind_name(WindowKind kind);
WindowKind window_kind_from_name(const std::string& name);

// Time-domain mono signal, samples nominally in [-1, 1].
struct Waveform {
  Vec samples;
  int sample_rate = 16000;
};

struct StftConfig {
  int win_length = 800;
  int hop_length = 200;
  int fft_size = 1024;
  WindowKind window = WindowKind::kPeriodicHann;

  int bins() const { return fft_size / 2 + 1; }
  // Throws kInvalidConfig unless 0 < hop <= win <= fft and fft is a power
  // of two.
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

// 50 ms window / 12.5 ms hop at the given rate, fft = next power of two.
StftConfig default_stft_config(int sample_rate);

struct ComplexSpectrogram {
  Mat re;  // frames x bins
  Mat im;  // frames x bins
  StftConfig config;

  Eigen::Index frames() const { return re.rows(); }
  Eigen::Index bins() const { return re.cols(); }
  void validate() const;
};

struct AmplitudeSpectrogram {
  Mat values;  // frames x bins, non-negative
  StftConfig config;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bins() const { return values.cols(); }
  void validate() const;
};

// Periodic Hann: wnd[n] = 0.5 * (1 - cos(2*pi*n / win_length)).
Vec make_window(WindowKind kind, int win_length);

// Radix-2 FFT plan for one power-of-two size. Real transforms use the
// packed half-size complex transform. The adjoint entry points implement
// the exact transpose of the forward/inverse maps (used by the tape).
class Fft {
 public:
  explicit Fft(int size);

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // x[n] (length size) -> re/im[k] (length bins), X_k = sum x_n e^{-2pi i kn/N}
  void forward_real(const double* x, double* re, double* im) const;
  // re/im[k] -> x[n], the exact inverse of forward_real (includes 1/N).
  void inverse_real(const double* re, const double* im, double* x) const;

  // Transpose of forward_real as a linear map R^N -> R^{2*bins}.
  void adjoint_forward_real(const double* gre, const double* gim,
                            double* gx) const;
  // Transpose of inverse_real as a linear map R^{2*bins} -> R^N.
  void adjoint_inverse_real(const double* gx, double* gre, double* gim) const;

 private:
  void transform_half(double* re, double* im, int sign) const;

  int n_;       // real transform size
  int half_;    // n_ / 2, complex transform size
  int stages_;  // log2(half_)
  std::vector<int> bitrev_;
  std::vector<double> stage_cos_, stage_sin_;  // per-stage twiddles, packed
  std::vector<double> tw_cos_, tw_sin_;        // e^{-2pi i k/N}, k in [0, half]
};

int stft_num_frames(Eigen::Index signal_len, const StftConfig& cfg);

// No center padding: frame t covers samples [t*hop, t*hop + win).
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Windowed overlap-add synthesis with squared-window normalization.
// Output length (frames-1)*hop + win. Samples whose window-square sum is
// zero come out as zero; a zero sum inside the fully-overlapped interior
// region is reported as a numeric error.
Waveform istft(const ComplexSpectrogram& X, int sample_rate);

AmplitudeSpectrogram amplitude(const ComplexSpectrogram& X);

// norm[p] = sum_t wnd[p - t*hop]^2 for the given frame count.
Vec window_square_ola(const Vec& window, int hop, int frames);

// Frobenius distance between spectrograms with conjugate-symmetric bin
// weighting (interior bins count twice), i.e. the distance between the
// underlying two-sided spectra up to the constant DFT factor.
double spectral_distance(const ComplexSpectrogram& a,
                         const ComplexSpectrogram& b);

}  // namespace melwave

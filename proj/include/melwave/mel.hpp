// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <vector>

#include "melwave/signal.hpp"

namespace melwave {

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct NormStats {
  Vec mean;
  Vec std;

  void validate() const;
  bool operator==(const NormStats& o) const {
    return mean == o.mean && std == o.std;
  }
};

struct MelSpectrogram {
  Mat values;  // frames x n_mels
  bool normalized = false;
  std::optional<NormStats> stats;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index n_mels() const { return values.cols(); }
  void validate() const;
};

// Triangular filters with centers equally spaced on the mel scale. The
// Moore-Penrose pseudo-inverse is computed once at construction and shared
// by every amplitude estimate.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, int sample_rate, int fft_size, double fmin,
                double fmax);

  const Mat& weights() const { return weights_; }          // n_mels x bins
  const Mat& pinv_transposed() const { return pinv_t_; }   // n_mels x bins
  int n_mels() const { return n_mels_; }
  int sample_rate() const { return sample_rate_; }
  int fft_size() const { return fft_size_; }
  int bins() const { return fft_size_ / 2 + 1; }
  double fmin() const { return fmin_; }
  double fmax() const { return fmax_; }

 private:
  Mat weights_;
  Mat pinv_t_;
  int n_mels_, sample_rate_, fft_size_;
  double fmin_, fmax_;
};

MelFilterbank build_filterbank(int n_mels, int sample_rate, int fft_size,
                               double fmin, double fmax);

MelSpectrogram mel_spectrum(const AmplitudeSpectrogram& A,
                            const MelFilterbank& fb);

MelSpectrogram normalize(const MelSpectrogram& m, const NormStats& stats);
MelSpectrogram denormalize(const MelSpectrogram& m, const NormStats& stats);

// Per-channel mean / population std over all frames.
NormStats fit_norm_stats(const std::vector<const MelSpectrogram*>& corpus);

// Least-squares amplitude estimate: clamp0(pinv(fb) * mel) per frame.
// Rejects normalized input; denormalize first.
AmplitudeSpectrogram epsilon_amplitude(const MelSpectrogram& m,
                                       const MelFilterbank& fb,
                                       const StftConfig& cfg);

}  // namespace melwave

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>

#include "melwave/mel.hpp"
#include "melwave/signal.hpp"

namespace melwave {

enum class PhaseInit { kZero, kSeededRandom };

struct GriffinLimConfig {
  int iterations = 64;
  PhaseInit init = PhaseInit::kZero;
  uint64_t seed = 0;

  void validate() const {
    if (iterations < 0)
      raise(ErrorKind::kInvalidConfig, "griffin-lim iterations must be >= 0");
  }
  bool operator==(const GriffinLimConfig&) const = default;
};

// Uniform phases in [-pi, pi); the taped and plain griffin_lim draw from
// this same sequence so seeded runs agree.
Mat random_phase_matrix(Eigen::Index frames, Eigen::Index bins, uint64_t seed);

// Replace each element's magnitude with A, keeping its phase; zero elements
// take zero phase (output A + 0i).
ComplexSpectrogram project_amplitude(const ComplexSpectrogram& X,
                                     const AmplitudeSpectrogram& A);

// stft(istft(X)): the metric projection onto spectrograms of time signals.
ComplexSpectrogram project_consistency(const ComplexSpectrogram& X);

// Alternating projections from the given amplitude; returns the spectrogram
// after the final consistency projection (or the phase-initialized
// spectrogram when iterations == 0).
ComplexSpectrogram griffin_lim(const AmplitudeSpectrogram& A,
                               const GriffinLimConfig& cfg);

// Full mel -> waveform path: denormalize if needed, estimate amplitude,
// run griffin_lim, synthesize.
Waveform reconstruct(const MelSpectrogram& m, const MelFilterbank& fb,
                     const StftConfig& cfg, const GriffinLimConfig& glcfg);

}  // namespace melwave

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "melwave/mel.hpp"
#include "melwave/signal.hpp"

namespace melwave {

// SI-SDR numerical guards: the error denominator gets kSiSdrEps and the
// result is clamped to +-kSiSdrClampDb (the unclamped metric is unbounded
// at the collinear point).
inline constexpr double kSiSdrEps = 1e-12;
inline constexpr double kSiSdrClampDb = 80.0;

struct LossReport {
  double loss_f = 0.0;
  double loss_t = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

// Mean squared difference over all time-channel elements. The summed
// convention is this value times frames * channels.
double loss_f(const MelSpectrogram& pred, const MelSpectrogram& target);

// 10*log10(|a r|^2 / (|a r - e|^2 + eps)) with a = <e, r>/|r|^2, clamped.
double si_sdr(const Waveform& est, const Waveform& ref);

// Negated SI-SDR.
double loss_t(const Waveform& est, const Waveform& ref);

LossReport joint_loss(const MelSpectrogram& pred_mel,
                      const MelSpectrogram& target_mel, const Waveform& est,
                      const Waveform& ref, double lambda);

}  // namespace melwave

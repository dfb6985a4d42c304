// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/loss.hpp"

#include <algorithm>
#include <cmath>

namespace melwave {

double loss_f(const MelSpectrogram& pred, const MelSpectrogram& target) {
  pred.validate();
  target.validate();
  if (pred.frames() != target.frames() || pred.n_mels() != target.n_mels())
    raise(ErrorKind::kInvalidInput, "loss_f shape mismatch");
  if (pred.normalized != target.normalized)
    raise(ErrorKind::kInvalidInput, "loss_f normalization state mismatch");
  if (pred.values.size() == 0)
    raise(ErrorKind::kInvalidInput, "loss_f on empty mel");
  return (pred.values - target.values).squaredNorm() /
         static_cast<double>(pred.values.size());
}

double si_sdr(const Waveform& est, const Waveform& ref) {
  if (est.samples.size() != ref.samples.size())
    raise(ErrorKind::kInvalidInput, "si_sdr length mismatch");
  if (est.samples.size() < 1)
    raise(ErrorKind::kInvalidInput, "si_sdr on empty signals");
  if (!est.samples.allFinite() || !ref.samples.allFinite())
    raise(ErrorKind::kInvalidInput, "si_sdr on non-finite signals");
  const double ref_energy = ref.samples.squaredNorm();
  if (ref_energy <= 0.0)
    raise(ErrorKind::kInvalidInput, "si_sdr reference is all zero");
  const double alpha = est.samples.dot(ref.samples) / ref_energy;
  const Vec scaled = alpha * ref.samples;
  const double target_energy = scaled.squaredNorm();
  const double error_energy = (scaled - est.samples).squaredNorm() + kSiSdrEps;
  const double value = 10.0 * std::log10(target_energy / error_energy);
  return std::clamp(value, -kSiSdrClampDb, kSiSdrClampDb);
}

double loss_t(const Waveform& est, const Waveform& ref) {
  return -si_sdr(est, ref);
}

LossReport joint_loss(const MelSpectrogram& pred_mel,
                      const MelSpectrogram& target_mel, const Waveform& est,
                      const Waveform& ref, double lambda) {
  if (lambda < 0.0)
    raise(ErrorKind::kInvalidConfig, "lambda must be >= 0");
  LossReport r;
  r.loss_f = loss_f(pred_mel, target_mel);
  r.loss_t = loss_t(est, ref);
  r.lambda = lambda;
  r.total = r.loss_f + lambda * r.loss_t;
  return r;
}

}  // namespace melwave

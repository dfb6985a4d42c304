// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <memory>

#include "melwave/autodiff.hpp"
#include "melwave/loss.hpp"
#include "melwave/mel.hpp"
#include "melwave/phase.hpp"
#include "melwave/signal.hpp"

namespace melwave::ad {

// Shared immutable FFT/window plan for the taped transforms.
struct StftPlan {
  StftConfig cfg;
  std::shared_ptr<const Fft> fft;
  Vec window;
};

StftPlan make_stft_plan(const StftConfig& cfg);

// --- spectral primitives (signals are 1 x L rows, frames are F x win) -------

Value frames_from_signal(const Value& signal, int win, int hop);
Value overlap_add(const Value& frames, int hop);
SpecVar rfft_rows(const Value& padded_frames, std::shared_ptr<const Fft> fft);
Value irfft_rows(const SpecVar& spec, std::shared_ptr<const Fft> fft);

// --- taped counterparts of the analysis/reconstruction path -----------------

SpecVar taped_stft(const Value& signal, const StftPlan& plan);
Value taped_istft(const SpecVar& spec, const StftPlan& plan);
SpecVar taped_project_amplitude(const SpecVar& spec, const Value& amp);
SpecVar taped_project_consistency(const SpecVar& spec, const StftPlan& plan);
SpecVar taped_griffin_lim(const Value& amp, const StftPlan& plan,
                          const GriffinLimConfig& glcfg);
Value taped_epsilon_amplitude(const Value& mel_raw, const MelFilterbank& fb);
Value taped_denormalize(const Value& mel_norm, const NormStats& stats);
Value taped_loss_f(const Value& pred, const Value& target);
Value taped_si_sdr(const Value& est, const Value& ref);
Value taped_loss_t(const Value& est, const Value& ref);

// Loss_T(istft(griffin_lim(eps(mel))), ref): the full differentiable
// time-domain loss as a function of a raw mel matrix.
Value taped_time_loss_from_mel(const Value& mel_raw, const MelFilterbank& fb,
                               const StftPlan& plan,
                               const GriffinLimConfig& glcfg, const Mat& ref);

}  // namespace melwave::ad

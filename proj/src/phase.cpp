// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/phase.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace melwave {

Mat random_phase_matrix(Eigen::Index frames, Eigen::Index bins, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-std::numbers::pi,
                                             std::numbers::pi);
  Mat phi(frames, bins);
  for (Eigen::Index t = 0; t < frames; ++t)
    for (Eigen::Index k = 0; k < bins; ++k) phi(t, k) = uni(rng);
  return phi;
}

ComplexSpectrogram project_amplitude(const ComplexSpectrogram& X,
                                     const AmplitudeSpectrogram& A) {
  X.validate();
  A.validate();
  if (X.frames() != A.frames() || X.bins() != A.bins() ||
      !(X.config == A.config))
    raise(ErrorKind::kInvalidInput, "amplitude projection shape mismatch");
  ComplexSpectrogram out;
  out.config = X.config;
  out.re.resize(X.frames(), X.bins());
  out.im.resize(X.frames(), X.bins());
  const double* xr = X.re.data();
  const double* xi = X.im.data();
  const double* a = A.values.data();
  double* orr = out.re.data();
  double* oi = out.im.data();
  const Eigen::Index n = X.re.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double m = std::sqrt(xr[k] * xr[k] + xi[k] * xi[k]);
    if (m > 0.0) {
      // Same evaluation order as the taped path: unit phase, then scale.
      orr[k] = a[k] * (xr[k] / m);
      oi[k] = a[k] * (xi[k] / m);
    } else {
      orr[k] = a[k];
      oi[k] = 0.0;
    }
  }
  return out;
}

ComplexSpectrogram project_consistency(const ComplexSpectrogram& X) {
  // istft/stft validate X and preserve the frame count.
  Waveform w = istft(X, /*sample_rate=*/16000);
  return stft(w, X.config);
}

ComplexSpectrogram griffin_lim(const AmplitudeSpectrogram& A,
                               const GriffinLimConfig& cfg) {
  A.validate();
  cfg.validate();
  ComplexSpectrogram X;
  X.config = A.config;
  if (cfg.init == PhaseInit::kZero) {
    X.re = A.values;
    X.im = Mat::Zero(A.frames(), A.bins());
  } else {
    const Mat phi = random_phase_matrix(A.frames(), A.bins(), cfg.seed);
    X.re = A.values.cwiseProduct(phi.array().cos().matrix());
    X.im = A.values.cwiseProduct(phi.array().sin().matrix());
  }
  for (int n = 0; n < cfg.iterations; ++n)
    X = project_consistency(project_amplitude(X, A));
  return X;
}

Waveform reconstruct(const MelSpectrogram& m, const MelFilterbank& fb,
                     const StftConfig& cfg, const GriffinLimConfig& glcfg) {
  m.validate();
  const MelSpectrogram* raw = &m;
  MelSpectrogram denormed;
  if (m.normalized) {
    denormed = denormalize(m, *m.stats);
    raw = &denormed;
  }
  AmplitudeSpectrogram A = epsilon_amplitude(*raw, fb, cfg);
  ComplexSpectrogram X = griffin_lim(A, glcfg);
  return istft(X, fb.sample_rate());
}

}  // namespace melwave

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/mel.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>

namespace melwave {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

void NormStats::validate() const {
  if (mean.size() != std.size())
    raise(ErrorKind::kInvalidStats, "norm stats mean/std length mismatch");
  if (!mean.allFinite() || !std.allFinite())
    raise(ErrorKind::kInvalidStats, "norm stats contain non-finite values");
  if ((std.array() <= 0.0).any())
    raise(ErrorKind::kInvalidStats, "norm stats require std > 0 per channel");
}

void MelSpectrogram::validate() const {
  if (!values.allFinite())
    raise(ErrorKind::kInvalidInput, "mel values contain non-finite entries");
  if (normalized) {
    if (!stats) raise(ErrorKind::kInvalidInput, "normalized mel lacks stats");
    stats->validate();
    if (stats->mean.size() != n_mels())
      raise(ErrorKind::kInvalidInput, "mel stats channel mismatch");
  }
  // Raw mels from analysis are non-negative by construction; denormalized
  // predictions may dip below zero and are clamped downstream.
}

MelFilterbank::MelFilterbank(int n_mels, int sample_rate, int fft_size,
                             double fmin, double fmax)
    : n_mels_(n_mels),
      sample_rate_(sample_rate),
      fft_size_(fft_size),
      fmin_(fmin),
      fmax_(fmax) {
  if (n_mels < 1) raise(ErrorKind::kInvalidConfig, "n_mels must be >= 1");
  if (sample_rate <= 0 || fft_size <= 1)
    raise(ErrorKind::kInvalidConfig, "bad filterbank sample_rate/fft_size");
  if (!(0.0 <= fmin && fmin < fmax && fmax <= sample_rate / 2.0))
    raise(ErrorKind::kInvalidConfig,
          "filterbank requires 0 <= fmin < fmax <= sample_rate/2");
  const int bins = fft_size / 2 + 1;
  if (n_mels > bins)
    raise(ErrorKind::kInvalidConfig, "more mel filters than fft bins");

  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  Vec edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  weights_.setZero(n_mels, bins);
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = std::min((f - lo) / (c - lo), (hi - f) / (hi - c));
      if (w > 0.0) weights_(m, k) = w;
    }
  }

  int prev_peak = -1;
  for (int m = 0; m < n_mels; ++m) {
    Eigen::Index peak;
    const double mx = weights_.row(m).maxCoeff(&peak);
    if (mx <= 0.0)
      raise(ErrorKind::kInvalidConfig,
            "mel filter " + std::to_string(m) + " has no positive weight");
    if (static_cast<int>(peak) <= prev_peak)
      raise(ErrorKind::kInvalidConfig,
            "mel filter peaks not strictly increasing (fft too coarse)");
    prev_peak = static_cast<int>(peak);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      Eigen::MatrixXd(weights_), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff =
      sv.size() > 0 ? sv[0] * bins * std::numeric_limits<double>::epsilon()
                    : 0.0;
  Eigen::VectorXd inv_sv(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    inv_sv[i] = sv[i] > cutoff ? 1.0 / sv[i] : 0.0;
  // pinv = V diag(1/s) U^T : bins x n_mels; stored transposed for row-major
  // frame-by-frame products.
  Eigen::MatrixXd pinv =
      svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
  pinv_t_ = pinv.transpose();
}

MelFilterbank build_filterbank(int n_mels, int sample_rate, int fft_size,
                               double fmin, double fmax) {
  return MelFilterbank(n_mels, sample_rate, fft_size, fmin, fmax);
}

MelSpectrogram mel_spectrum(const AmplitudeSpectrogram& A,
                            const MelFilterbank& fb) {
  A.validate();
  if (A.bins() != fb.bins())
    raise(ErrorKind::kInvalidInput, "amplitude bins do not match filterbank");
  MelSpectrogram m;
  m.values.noalias() = A.values * fb.weights().transpose();
  m.normalized = false;
  return m;
}

MelSpectrogram normalize(const MelSpectrogram& m, const NormStats& stats) {
  m.validate();
  stats.validate();
  if (m.normalized)
    raise(ErrorKind::kInvalidInput, "mel already normalized");
  if (stats.mean.size() != m.n_mels())
    raise(ErrorKind::kInvalidInput, "norm stats channel mismatch");
  MelSpectrogram out;
  out.values = (m.values.rowwise() - stats.mean.transpose()).array().rowwise() /
               stats.std.transpose().array();
  out.normalized = true;
  out.stats = stats;
  return out;
}

MelSpectrogram denormalize(const MelSpectrogram& m, const NormStats& stats) {
  stats.validate();
  if (!m.normalized)
    raise(ErrorKind::kInvalidInput, "mel is not normalized");
  if (stats.mean.size() != m.n_mels())
    raise(ErrorKind::kInvalidInput, "norm stats channel mismatch");
  MelSpectrogram out;
  out.values = (m.values.array().rowwise() * stats.std.transpose().array())
                   .rowwise() +
               stats.mean.transpose().array();
  out.normalized = false;
  return out;
}

NormStats fit_norm_stats(const std::vector<const MelSpectrogram*>& corpus) {
  if (corpus.empty())
    raise(ErrorKind::kInvalidInput, "cannot fit stats on empty corpus");
  const Eigen::Index ch = corpus.front()->n_mels();
  Eigen::Index count = 0;
  Vec sum = Vec::Zero(ch);
  for (const MelSpectrogram* m : corpus) {
    if (m->normalized)
      raise(ErrorKind::kInvalidInput, "fit stats expects raw mel input");
    if (m->n_mels() != ch)
      raise(ErrorKind::kInvalidInput, "corpus channel count mismatch");
    sum += m->values.colwise().sum().transpose();
    count += m->frames();
  }
  if (count == 0) raise(ErrorKind::kInvalidInput, "corpus has no frames");
  NormStats stats;
  stats.mean = sum / static_cast<double>(count);
  Vec sq = Vec::Zero(ch);
  for (const MelSpectrogram* m : corpus) {
    Mat centered = m->values.rowwise() - stats.mean.transpose();
    sq += centered.array().square().colwise().sum().matrix().transpose();
  }
  stats.std = (sq / static_cast<double>(count)).array().sqrt();
  stats.validate();
  return stats;
}

AmplitudeSpectrogram epsilon_amplitude(const MelSpectrogram& m,
                                       const MelFilterbank& fb,
                                       const StftConfig& cfg) {
  m.validate();
  cfg.validate();
  if (m.normalized)
    raise(ErrorKind::kInvalidInput,
          "epsilon_amplitude expects raw mel; denormalize first");
  if (m.n_mels() != fb.n_mels())
    raise(ErrorKind::kInvalidInput, "mel channels do not match filterbank");
  if (cfg.bins() != fb.bins())
    raise(ErrorKind::kInvalidInput, "stft config bins do not match filterbank");
  AmplitudeSpectrogram A;
  A.config = cfg;
  A.values.noalias() = m.values * fb.pinv_transposed();
  A.values = A.values.cwiseMax(0.0);
  return A;
}

}  // namespace melwave

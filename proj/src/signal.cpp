// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/signal.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace melwave {

namespace {

constexpr double kPi = std::numbers::pi;
// Division guard for the OLA normalization; only protects against literal
// zero sums, never alters samples the window actually covers.
constexpr double kNormFloor = 1e-300;
// Threshold for "reconstruction lost" inside the fully-overlapped interior.
constexpr double kInteriorDegenerate = 1e-12;

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

void check_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) raise(ErrorKind::kInvalidInput, std::string(what) + " contains non-finite values");
}

void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) raise(ErrorKind::kInvalidInput, std::string(what) + " contains non-finite values");
}

}  // namespace

const char* window_kind_name(WindowKind kind) {
  switch (kind) {
    case WindowKind::kPeriodicHann: return "hann";
    case WindowKind::kRectangular: return "rect";
  }
  return "unknown";
}

WindowKind window_kind_from_name(const std::string& name) {
  if (name == "hann") return WindowKind::kPeriodicHann;
  if (name == "rect") return WindowKind::kRectangular;
  raise(ErrorKind::kInvalidConfig, "unknown window kind: " + name);
}

void StftConfig::validate() const {
  if (!(0 < hop_length && hop_length <= win_length && win_length <= fft_size))
    raise(ErrorKind::kInvalidConfig,
          "stft config requires 0 < hop <= win <= fft");
  if (!is_pow2(fft_size))
    raise(ErrorKind::kInvalidConfig, "fft_size must be a power of two");
}

StftConfig default_stft_config(int sample_rate) {
  if (sample_rate <= 0) raise(ErrorKind::kInvalidConfig, "sample_rate must be > 0");
  StftConfig cfg;
  cfg.win_length = sample_rate / 20;        // 50 ms
  cfg.hop_length = sample_rate / 80;        // 12.5 ms
  int fft = 1;
  while (fft < cfg.win_length) fft <<= 1;
  cfg.fft_size = fft;
  cfg.validate();
  return cfg;
}

void ComplexSpectrogram::validate() const {
  config.validate();
  if (re.rows() != im.rows() || re.cols() != im.cols())
    raise(ErrorKind::kInvalidInput, "spectrogram re/im shape mismatch");
  if (re.cols() != config.bins())
    raise(ErrorKind::kInvalidInput, "spectrogram bins inconsistent with config");
  check_finite(re, "spectrogram");
  check_finite(im, "spectrogram");
}

void AmplitudeSpectrogram::validate() const {
  config.validate();
  if (values.cols() != config.bins())
    raise(ErrorKind::kInvalidInput, "amplitude bins inconsistent with config");
  check_finite(values, "amplitude");
  if ((values.array() < 0.0).any())
    raise(ErrorKind::kInvalidInput, "amplitude must be non-negative");
}

Vec make_window(WindowKind kind, int win_length) {
  if (win_length < 2)
    raise(ErrorKind::kInvalidConfig, "win_length must be >= 2");
  Vec w(win_length);
  switch (kind) {
    case WindowKind::kPeriodicHann:
      for (int n = 0; n < win_length; ++n)
        w[n] = 0.5 * (1.0 - std::cos(2.0 * kPi * n / win_length));
      break;
    case WindowKind::kRectangular:
      w.setOnes();
      break;
  }
  return w;
}

// ---------------------------------------------------------------------------
// FFT

Fft::Fft(int size) : n_(size), half_(size / 2) {
  if (!is_pow2(size) || size < 2)
    raise(ErrorKind::kInvalidConfig, "fft size must be a power of two >= 2");
  stages_ = 0;
  while ((1 << stages_) < half_) ++stages_;

  bitrev_.resize(half_);
  for (int i = 0; i < half_; ++i) {
    int r = 0;
    for (int b = 0; b < stages_; ++b) r |= ((i >> b) & 1) << (stages_ - 1 - b);
    bitrev_[i] = r;
  }

  // Stage s has butterflies of span len = 2^{s+1}; pack its len/2 twiddles
  // consecutively. Stored for sign = -1; inverse negates the sine.
  stage_cos_.reserve(half_);
  stage_sin_.reserve(half_);
  for (int len = 2; len <= half_; len <<= 1) {
    int h = len / 2;
    for (int k = 0; k < h; ++k) {
      stage_cos_.push_back(std::cos(2.0 * kPi * k / len));
      stage_sin_.push_back(std::sin(2.0 * kPi * k / len));
    }
  }

  tw_cos_.resize(half_ + 1);
  tw_sin_.resize(half_ + 1);
  for (int k = 0; k <= half_; ++k) {
    tw_cos_[k] = std::cos(2.0 * kPi * k / n_);
    tw_sin_[k] = std::sin(2.0 * kPi * k / n_);
  }
}

void Fft::transform_half(double* re, double* im, int sign) const {
  for (int i = 0; i < half_; ++i) {
    int j = bitrev_[i];
    if (j > i) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  const double* cs = stage_cos_.data();
  const double* sn = stage_sin_.data();
  for (int len = 2; len <= half_; len <<= 1) {
    int h = len / 2;
    for (int start = 0; start < half_; start += len) {
      for (int k = 0; k < h; ++k) {
        double wr = cs[k];
        double wi = sign < 0 ? -sn[k] : sn[k];
        int a = start + k, b = start + k + h;
        double vr = re[b] * wr - im[b] * wi;
        double vi = re[b] * wi + im[b] * wr;
        re[b] = re[a] - vr;
        im[b] = im[a] - vi;
        re[a] += vr;
        im[a] += vi;
      }
    }
    cs += h;
    sn += h;
  }
}

void Fft::forward_real(const double* x, double* re, double* im) const {
  if (half_ == 1) {
    // n_ == 2: bins are [x0 + x1, x0 - x1].
    re[0] = x[0] + x[1];
    re[1] = x[0] - x[1];
    im[0] = im[1] = 0.0;
    return;
  }
  std::vector<double> zr(half_), zi(half_);
  for (int k = 0; k < half_; ++k) {
    zr[k] = x[2 * k];
    zi[k] = x[2 * k + 1];
  }
  transform_half(zr.data(), zi.data(), -1);

  // Untangle: X_k = E_k + e^{-2pi i k/N} O_k with E/O the even/odd DFTs.
  for (int k = 0; k <= half_; ++k) {
    int k1 = k % half_;
    int k2 = (half_ - k) % half_;
    double er = 0.5 * (zr[k1] + zr[k2]);
    double ei = 0.5 * (zi[k1] - zi[k2]);
    double orr = 0.5 * (zi[k1] + zi[k2]);
    double oi = -0.5 * (zr[k1] - zr[k2]);
    double c = tw_cos_[k], s = -tw_sin_[k];
    re[k] = er + orr * c - oi * s;
    im[k] = ei + orr * s + oi * c;
  }
  im[0] = 0.0;
  im[half_] = 0.0;
}

void Fft::inverse_real(const double* re, const double* im, double* x) const {
  if (half_ == 1) {
    x[0] = 0.5 * (re[0] + re[1]);
    x[1] = 0.5 * (re[0] - re[1]);
    return;
  }
  std::vector<double> zr(half_), zi(half_);
  for (int k = 0; k < half_; ++k) {
    int mk = half_ - k;  // in [1, half], valid bin index
    // DC/Nyquist imaginary parts are ignored: a real signal has none and
    // forward_real never emits them.
    const double im_k = k == 0 ? 0.0 : im[k];
    const double im_mk = mk == half_ ? 0.0 : im[mk];
    double er = 0.5 * (re[k] + re[mk]);
    double ei = 0.5 * (im_k - im_mk);
    double tr = 0.5 * (re[k] - re[mk]);
    double ti = 0.5 * (im_k + im_mk);
    // O_k = e^{+2pi i k/N} * (t_r + i t_i)
    double c = tw_cos_[k], s = tw_sin_[k];
    double orr = tr * c - ti * s;
    double oi = tr * s + ti * c;
    // Z_k = E_k + i O_k
    zr[k] = er - oi;
    zi[k] = ei + orr;
  }
  transform_half(zr.data(), zi.data(), +1);
  double inv = 1.0 / half_;
  for (int k = 0; k < half_; ++k) {
    x[2 * k] = zr[k] * inv;
    x[2 * k + 1] = zi[k] * inv;
  }
}

void Fft::adjoint_forward_real(const double* gre, const double* gim,
                               double* gx) const {
  // Transpose of forward_real: gx = N * inverse_real(h) with interior bins
  // halved (the one-sided layout stores conjugate pairs once).
  std::vector<double> hre(half_ + 1), him(half_ + 1);
  hre[0] = gre[0];
  him[0] = gim[0];
  hre[half_] = gre[half_];
  him[half_] = gim[half_];
  for (int k = 1; k < half_; ++k) {
    hre[k] = 0.5 * gre[k];
    him[k] = 0.5 * gim[k];
  }
  inverse_real(hre.data(), him.data(), gx);
  for (int i = 0; i < n_; ++i) gx[i] *= n_;
}

void Fft::adjoint_inverse_real(const double* gx, double* gre,
                               double* gim) const {
  // Transpose of inverse_real: rfft scaled by c_k / N, c = 1 at the edge
  // bins and 2 inside.
  forward_real(gx, gre, gim);
  double inv = 1.0 / n_;
  gre[0] *= inv;
  gim[0] *= inv;
  gre[half_] *= inv;
  gim[half_] *= inv;
  for (int k = 1; k < half_; ++k) {
    gre[k] *= 2.0 * inv;
    gim[k] *= 2.0 * inv;
  }
}

// ---------------------------------------------------------------------------
// STFT / ISTFT

int stft_num_frames(Eigen::Index signal_len, const StftConfig& cfg) {
  if (signal_len < cfg.win_length) return 0;
  return 1 + static_cast<int>((signal_len - cfg.win_length) / cfg.hop_length);
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.sample_rate <= 0)
    raise(ErrorKind::kInvalidInput, "waveform sample_rate must be > 0");
  check_finite(w.samples, "waveform");
  if (w.samples.size() < cfg.win_length)
    raise(ErrorKind::kInvalidInput, "signal shorter than one analysis window");

  const int frames = stft_num_frames(w.samples.size(), cfg);
  const int bins = cfg.bins();
  const Vec wnd = make_window(cfg.window, cfg.win_length);
  Fft fft(cfg.fft_size);

  ComplexSpectrogram X;
  X.config = cfg;
  X.re.resize(frames, bins);
  X.im.resize(frames, bins);
  std::vector<double> buf(cfg.fft_size, 0.0);
  for (int t = 0; t < frames; ++t) {
    const double* seg = w.samples.data() + static_cast<size_t>(t) * cfg.hop_length;
    for (int n = 0; n < cfg.win_length; ++n) buf[n] = seg[n] * wnd[n];
    // buf[win..fft) stays zero
    fft.forward_real(buf.data(), X.re.row(t).data(), X.im.row(t).data());
  }
  return X;
}

Vec window_square_ola(const Vec& window, int hop, int frames) {
  const int win = static_cast<int>(window.size());
  Vec norm = Vec::Zero(static_cast<Eigen::Index>(frames - 1) * hop + win);
  for (int t = 0; t < frames; ++t)
    for (int n = 0; n < win; ++n) norm[t * hop + n] += window[n] * window[n];
  return norm;
}

Waveform istft(const ComplexSpectrogram& X, int sample_rate) {
  X.validate();
  if (sample_rate <= 0)
    raise(ErrorKind::kInvalidInput, "sample_rate must be > 0");
  const StftConfig& cfg = X.config;
  const int frames = static_cast<int>(X.frames());
  if (frames == 0) raise(ErrorKind::kInvalidInput, "empty spectrogram");
  const int win = cfg.win_length;
  const int hop = cfg.hop_length;
  const Eigen::Index out_len = static_cast<Eigen::Index>(frames - 1) * hop + win;
  const Vec wnd = make_window(cfg.window, win);
  const Vec norm = window_square_ola(wnd, hop, frames);

  for (Eigen::Index p = win; p < out_len - win; ++p)
    if (norm[p] <= kInteriorDegenerate)
      raise(ErrorKind::kNumeric,
            "degenerate overlap-add normalization inside interior");

  Fft fft(cfg.fft_size);
  Vec acc = Vec::Zero(out_len);
  std::vector<double> frame(cfg.fft_size);
  for (int t = 0; t < frames; ++t) {
    fft.inverse_real(X.re.row(t).data(), X.im.row(t).data(), frame.data());
    double* out = acc.data() + static_cast<size_t>(t) * hop;
    for (int n = 0; n < win; ++n) out[n] += wnd[n] * frame[n];
  }
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(out_len);
  for (Eigen::Index p = 0; p < out_len; ++p)
    w.samples[p] = norm[p] > kNormFloor ? acc[p] / norm[p] : 0.0;
  return w;
}

AmplitudeSpectrogram amplitude(const ComplexSpectrogram& X) {
  X.validate();
  AmplitudeSpectrogram A;
  A.config = X.config;
  A.values = (X.re.array().square() + X.im.array().square()).sqrt();
  return A;
}

double spectral_distance(const ComplexSpectrogram& a,
                         const ComplexSpectrogram& b) {
  if (a.frames() != b.frames() || a.bins() != b.bins())
    raise(ErrorKind::kInvalidInput, "spectrogram shape mismatch");
  const Eigen::Index last = a.bins() - 1;
  double acc = 0.0;
  for (Eigen::Index t = 0; t < a.frames(); ++t) {
    for (Eigen::Index k = 0; k <= last; ++k) {
      double dr = a.re(t, k) - b.re(t, k);
      double di = a.im(t, k) - b.im(t, k);
      double w = (k == 0 || k == last) ? 1.0 : 2.0;
      acc += w * (dr * dr + di * di);
    }
  }
  return std::sqrt(acc);
}

}  // namespace melwave

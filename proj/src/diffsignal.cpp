// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/diffsignal.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace melwave::ad {

namespace {
constexpr double kNormFloor = 1e-300;
constexpr double kInteriorDegenerate = 1e-12;
}  // namespace

StftPlan make_stft_plan(const StftConfig& cfg) {
  cfg.validate();
  StftPlan plan;
  plan.cfg = cfg;
  plan.fft = std::make_shared<const Fft>(cfg.fft_size);
  plan.window = make_window(cfg.window, cfg.win_length);
  return plan;
}

Value frames_from_signal(const Value& signal, int win, int hop) {
  const Mat& s = signal.val();
  if (s.rows() != 1)
    raise(ErrorKind::kInvalidInput, "frames_from_signal expects a 1 x L row");
  if (s.cols() < win)
    raise(ErrorKind::kInvalidInput, "signal shorter than one analysis window");
  const int frames = 1 + static_cast<int>((s.cols() - win) / hop);
  Tape* t = signal.tape();
  Mat out(frames, win);
  for (int f = 0; f < frames; ++f)
    out.row(f) = s.block(0, static_cast<Eigen::Index>(f) * hop, 1, win);
  if (!t) return Value::constant(std::move(out));
  const Eigen::Index len = s.cols();
  return t->emit(std::move(out), [signal, win, hop, len](Tape& tp, const Mat& g, const Mat&) {
    Mat gs = Mat::Zero(1, len);
    for (Eigen::Index f = 0; f < g.rows(); ++f)
      gs.block(0, f * hop, 1, win) += g.row(f);
    tp.accum(signal, gs);
  });
}

Value overlap_add(const Value& frames, int hop) {
  const Mat& fv = frames.val();
  if (fv.rows() < 1) raise(ErrorKind::kInvalidInput, "overlap_add of nothing");
  const Eigen::Index win = fv.cols();
  const Eigen::Index out_len = (fv.rows() - 1) * hop + win;
  Tape* t = frames.tape();
  Mat out = Mat::Zero(1, out_len);
  for (Eigen::Index f = 0; f < fv.rows(); ++f)
    out.block(0, f * hop, 1, win) += fv.row(f);
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [frames, hop, win](Tape& tp, const Mat& g, const Mat&) {
    Mat gf(g.cols() >= win ? (g.cols() - win) / hop + 1 : 0, win);
    for (Eigen::Index f = 0; f < gf.rows(); ++f)
      gf.row(f) = g.block(0, f * hop, 1, win);
    tp.accum(frames, gf);
  });
}

SpecVar rfft_rows(const Value& padded_frames, std::shared_ptr<const Fft> fft) {
  const Mat& x = padded_frames.val();
  if (x.cols() != fft->size())
    raise(ErrorKind::kInvalidInput, "rfft_rows expects fft_size columns");
  const int bins = fft->bins();
  Mat re(x.rows(), bins), im(x.rows(), bins);
  for (Eigen::Index f = 0; f < x.rows(); ++f)
    fft->forward_real(x.row(f).data(), re.row(f).data(), im.row(f).data());
  Tape* t = padded_frames.tape();
  if (!t)
    return {Value::constant(std::move(re)), Value::constant(std::move(im))};
  // The pair shares one linear map; each half back-propagates its own part.
  auto make_bwd = [padded_frames, fft](bool imaginary) {
    return [padded_frames, fft, imaginary](Tape& tp, const Mat& g, const Mat&) {
      const int bins = fft->bins();
      Mat gx(g.rows(), fft->size());
      Vec zeros = Vec::Zero(bins);
      for (Eigen::Index f = 0; f < g.rows(); ++f) {
        if (imaginary)
          fft->adjoint_forward_real(zeros.data(), g.row(f).data(),
                                    gx.row(f).data());
        else
          fft->adjoint_forward_real(g.row(f).data(), zeros.data(),
                                    gx.row(f).data());
      }
      tp.accum(padded_frames, gx);
    };
  };
  Value vre = t->emit(std::move(re), make_bwd(false));
  Value vim = t->emit(std::move(im), make_bwd(true));
  return {vre, vim};
}

Value irfft_rows(const SpecVar& spec, std::shared_ptr<const Fft> fft) {
  const Mat& re = spec.re.val();
  const Mat& im = spec.im.val();
  if (re.cols() != fft->bins() || im.cols() != fft->bins() ||
      re.rows() != im.rows())
    raise(ErrorKind::kInvalidInput, "irfft_rows shape mismatch");
  Mat out(re.rows(), fft->size());
  for (Eigen::Index f = 0; f < re.rows(); ++f)
    fft->inverse_real(re.row(f).data(), im.row(f).data(), out.row(f).data());
  Tape* t = spec.re.tape() ? spec.re.tape() : spec.im.tape();
  if (!t) return Value::constant(std::move(out));
  Value vre = spec.re, vim = spec.im;
  return t->emit(std::move(out), [vre, vim, fft](Tape& tp, const Mat& g, const Mat&) {
    Mat gre(g.rows(), fft->bins()), gim(g.rows(), fft->bins());
    for (Eigen::Index f = 0; f < g.rows(); ++f)
      fft->adjoint_inverse_real(g.row(f).data(), gre.row(f).data(),
                                gim.row(f).data());
    tp.accum(vre, gre);
    tp.accum(vim, gim);
  });
}

SpecVar taped_stft(const Value& signal, const StftPlan& plan) {
  Value frames =
      frames_from_signal(signal, plan.cfg.win_length, plan.cfg.hop_length);
  Value windowed = row_mul_vec(frames, plan.window);
  Value padded = pad_cols(windowed, plan.cfg.fft_size);
  return rfft_rows(padded, plan.fft);
}

Value taped_istft(const SpecVar& spec, const StftPlan& plan) {
  const Eigen::Index frames = spec.re.val().rows();
  if (frames < 1) raise(ErrorKind::kInvalidInput, "istft of empty spectrogram");
  const int win = plan.cfg.win_length;
  const int hop = plan.cfg.hop_length;
  const Vec norm = window_square_ola(plan.window, hop, static_cast<int>(frames));
  const Eigen::Index out_len = norm.size();
  for (Eigen::Index p = win; p < out_len - win; ++p)
    if (norm[p] <= kInteriorDegenerate)
      raise(ErrorKind::kNumeric,
            "degenerate overlap-add normalization inside interior");
  Mat inv_norm(1, out_len);
  for (Eigen::Index p = 0; p < out_len; ++p)
    inv_norm(0, p) = norm[p] > kNormFloor ? 1.0 / norm[p] : 0.0;

  Value time = irfft_rows(spec, plan.fft);
  Value trimmed = take_cols(time, win);
  Value windowed = row_mul_vec(trimmed, plan.window);
  Value summed = overlap_add(windowed, hop);
  return cmul(summed, inv_norm);
}

SpecVar taped_project_amplitude(const SpecVar& spec, const Value& amp) {
  SpecVar u = unit_phase(spec);
  return {mul(amp, u.re), mul(amp, u.im)};
}

SpecVar taped_project_consistency(const SpecVar& spec, const StftPlan& plan) {
  return taped_stft(taped_istft(spec, plan), plan);
}

SpecVar taped_griffin_lim(const Value& amp, const StftPlan& plan,
                          const GriffinLimConfig& glcfg) {
  glcfg.validate();
  const Mat& a = amp.val();
  SpecVar x;
  if (glcfg.init == PhaseInit::kZero) {
    x.re = amp;
    x.im = Value::constant(Mat::Zero(a.rows(), a.cols()));
  } else {
    x = complex_from_polar(
        amp, Value::constant(random_phase_matrix(a.rows(), a.cols(), glcfg.seed)));
  }
  for (int n = 0; n < glcfg.iterations; ++n)
    x = taped_project_consistency(taped_project_amplitude(x, amp), plan);
  return x;
}

Value taped_epsilon_amplitude(const Value& mel_raw, const MelFilterbank& fb) {
  if (mel_raw.val().cols() != fb.n_mels())
    raise(ErrorKind::kInvalidInput, "mel channels do not match filterbank");
  Value est = matmul(mel_raw, Value::constant(Mat(fb.pinv_transposed())));
  return clamp(est, 0.0, std::numeric_limits<double>::infinity());
}

Value taped_denormalize(const Value& mel_norm, const NormStats& stats) {
  stats.validate();
  if (mel_norm.val().cols() != stats.mean.size())
    raise(ErrorKind::kInvalidInput, "norm stats channel mismatch");
  return row_add_vec(row_mul_vec(mel_norm, stats.std), stats.mean);
}

Value taped_loss_f(const Value& pred, const Value& target) {
  Value d = sub(pred, target);
  return mean(mul(d, d));
}

Value taped_si_sdr(const Value& est, const Value& ref) {
  if (est.val().rows() != 1 || ref.val().rows() != 1 ||
      est.val().cols() != ref.val().cols())
    raise(ErrorKind::kInvalidInput, "si_sdr expects equal-length rows");
  const double ref_energy = ref.val().squaredNorm();
  if (ref_energy <= 0.0)
    raise(ErrorKind::kInvalidInput, "si_sdr reference is all zero");
  Value alpha = div(dot(est, ref), Value::scalar_const(ref_energy));
  Value scaled = smul(alpha, ref);
  Value err = sub(scaled, est);
  Value target_energy = norm_sq(scaled);
  Value error_energy = add_scalar(norm_sq(err), kSiSdrEps);
  Value db = scale(log10(div(target_energy, error_energy)), 10.0);
  return clamp(db, -kSiSdrClampDb, kSiSdrClampDb);
}

Value taped_loss_t(const Value& est, const Value& ref) {
  return scale(taped_si_sdr(est, ref), -1.0);
}

Value taped_time_loss_from_mel(const Value& mel_raw, const MelFilterbank& fb,
                               const StftPlan& plan,
                               const GriffinLimConfig& glcfg, const Mat& ref) {
  Value amp = taped_epsilon_amplitude(mel_raw, fb);
  SpecVar spec = taped_griffin_lim(amp, plan, glcfg);
  Value wave = taped_istft(spec, plan);
  return taped_loss_t(wave, Value::constant(ref));
}

}  // namespace melwave::ad

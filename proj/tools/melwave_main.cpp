// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "melwave/diffsignal.hpp"
#include "melwave/io.hpp"
#include "melwave/loss.hpp"
#include "melwave/mel.hpp"
#include "melwave/model.hpp"
#include "melwave/phase.hpp"
#include "melwave/signal.hpp"

namespace {

using namespace melwave;

// All numeric output carries six significant digits.
std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%#.6g", v);
  return buf;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig: return 2;
    case ErrorKind::kInvalidInput: return 3;
    case ErrorKind::kUnsupportedFormat: return 4;
    case ErrorKind::kCorruptFile: return 5;
    case ErrorKind::kNumeric: return 6;
    case ErrorKind::kTrainingFailure: return 7;
    case ErrorKind::kEmptyOutput: return 8;
  }
  return 1;
}

int next_pow2(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

std::vector<int> parse_tokens(const std::string& text) {
  std::vector<int> tokens;
  std::istringstream is(text);
  std::string item;
  while (is >> item) {
    try {
      size_t pos = 0;
      tokens.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      raise(ErrorKind::kInvalidInput, "bad token id: " + item);
    }
  }
  if (tokens.empty()) raise(ErrorKind::kInvalidInput, "empty token sequence");
  return tokens;
}

struct StftFlags {
  int win = 0, hop = 0, fft = 0;
  std::string window = "hann";

  void attach(CLI::App* cmd) {
    cmd->add_option("--win", win, "analysis window length in samples (0: 50 ms)");
    cmd->add_option("--hop", hop, "hop length in samples (0: 12.5 ms)");
    cmd->add_option("--fft", fft, "FFT size (0: next power of two >= win)");
    cmd->add_option("--window", window, "window kind: hann or rect");
  }
  StftConfig resolve(int sample_rate) const {
    StftConfig cfg;
    cfg.win_length = win > 0 ? win : sample_rate / 20;
    cfg.hop_length = hop > 0 ? hop : sample_rate / 80;
    cfg.fft_size = fft > 0 ? fft : next_pow2(cfg.win_length);
    cfg.window = window_kind_from_name(window);
    cfg.validate();
    return cfg;
  }
};

struct MelFlags {
  int n_mels = 80;
  double fmin = 0.0, fmax = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n-mels", n_mels, "mel channel count");
    cmd->add_option("--fmin", fmin, "lowest filter frequency in Hz");
    cmd->add_option("--fmax", fmax, "highest filter frequency in Hz (0: sr/2)");
  }
  MelFilterbank resolve(int sample_rate, int fft_size) const {
    const double hi = fmax > 0.0 ? fmax : sample_rate / 2.0;
    return MelFilterbank(n_mels, sample_rate, fft_size, fmin, hi);
  }
};

GriffinLimConfig gl_from_flags(int iterations, const std::string& init,
                               uint64_t seed) {
  GriffinLimConfig cfg;
  cfg.iterations = iterations;
  if (init == "zero") cfg.init = PhaseInit::kZero;
  else if (init == "random") cfg.init = PhaseInit::kSeededRandom;
  else raise(ErrorKind::kInvalidConfig, "--init must be zero or random");
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

int cmd_extract(const std::string& in, const std::string& out,
                const StftFlags& stft_flags, const MelFlags& mel_flags,
                bool normalize_features) {
  Waveform w = read_wav(in);
  StftConfig cfg = stft_flags.resolve(w.sample_rate);
  MelFilterbank fb = mel_flags.resolve(w.sample_rate, cfg.fft_size);
  MelSpectrogram mel = mel_spectrum(amplitude(stft(w, cfg)), fb);
  if (normalize_features) {
    NormStats stats = fit_norm_stats({&mel});
    mel = normalize(mel, stats);
  }
  write_mel(out, mel, w.sample_rate, cfg.hop_length, cfg.win_length);
  std::cout << "{\"frames\":" << mel.frames() << ",\"n_mels\":" << mel.n_mels()
            << ",\"normalized\":" << (mel.normalized ? "true" : "false")
            << "}\n";
  return 0;
}

int cmd_reconstruct(const std::string& in, const std::string& out,
                    int iterations, const std::string& init, uint64_t seed,
                    int fft_override, double fmin, double fmax, int bits) {
  MelFile f = read_mel(in);
  if (f.sample_rate <= 0 || f.win_length <= 0 || f.hop_length <= 0)
    raise(ErrorKind::kCorruptFile, "mel file lacks analysis geometry");
  StftConfig cfg;
  cfg.win_length = f.win_length;
  cfg.hop_length = f.hop_length;
  cfg.fft_size = fft_override > 0 ? fft_override : next_pow2(f.win_length);
  cfg.validate();
  const double hi = fmax > 0.0 ? fmax : f.sample_rate / 2.0;
  MelFilterbank fb(static_cast<int>(f.mel.n_mels()), f.sample_rate,
                   cfg.fft_size, fmin, hi);
  GriffinLimConfig gl = gl_from_flags(iterations, init, seed);
  Waveform w = reconstruct(f.mel, fb, cfg, gl);
  write_wav(out, w, bits);
  std::cout << "{\"samples\":" << w.samples.size()
            << ",\"sample_rate\":" << w.sample_rate
            << ",\"iterations\":" << iterations << "}\n";
  return 0;
}

int cmd_evaluate(const std::string& est_path, const std::string& ref_path) {
  Waveform est = read_wav(est_path);
  Waveform ref = read_wav(ref_path);
  const double sdr = si_sdr(est, ref);
  std::cout << "{\"si_sdr_db\":" << fmt6(sdr) << ",\"loss_t\":" << fmt6(-sdr)
            << ",\"samples\":" << ref.samples.size() << "}\n";
  return 0;
}

int cmd_loss(const std::string& pred_path, const std::string& target_path,
             const std::string& est_path, const std::string& ref_path,
             double lambda) {
  MelFile pred = read_mel(pred_path);
  MelFile target = read_mel(target_path);
  const double lf = loss_f(pred.mel, target.mel);
  if (!est_path.empty() || !ref_path.empty()) {
    if (est_path.empty() || ref_path.empty())
      raise(ErrorKind::kInvalidInput, "--est and --ref must be given together");
    Waveform est = read_wav(est_path);
    Waveform ref = read_wav(ref_path);
    LossReport r = joint_loss(pred.mel, target.mel, est, ref, lambda);
    std::cout << "{\"loss_f\":" << fmt6(r.loss_f) << ",\"loss_t\":"
              << fmt6(r.loss_t) << ",\"lambda\":" << fmt6(r.lambda)
              << ",\"total\":" << fmt6(r.total) << "}\n";
  } else {
    std::cout << "{\"loss_f\":" << fmt6(lf) << ",\"lambda\":" << fmt6(lambda)
              << ",\"total\":" << fmt6(lf) << "}\n";
  }
  return 0;
}

void print_gradcheck_line(const char* name, const ad::GradCheckReport& r) {
  std::cout << "{\"check\":\"" << name << "\",\"max_rel_error\":"
            << fmt6(r.max_rel_error) << ",\"checked\":" << r.n_checked
            << ",\"excluded_floor\":" << r.n_excluded_floor
            << ",\"excluded_nonsmooth\":" << r.n_excluded_nonsmooth
            << ",\"passed\":" << (r.passed ? "true" : "false") << "}\n";
}

int cmd_gradcheck(int iterations) {
  using ad::Tape;
  using ad::Value;
  bool all_passed = true;

  {
    Mat target = Mat::Zero(5, 8);
    for (Eigen::Index i = 0; i < target.size(); ++i)
      target.data()[i] = 0.1 * static_cast<double>((i * 7) % 11) - 0.3;
    Mat x0 = target.array() + 0.37;
    ad::GradCheckOptions opts;
    opts.fd_step = 1e-6;
    opts.tol = 1e-6;
    ad::GradCheckReport r = ad::grad_check(
        [&target](Tape&, const Value& x) {
          return ad::taped_loss_f(x, Value::constant(target));
        },
        x0, opts);
    print_gradcheck_line("loss_f", r);
    all_passed = all_passed && r.passed;
  }

  {
    Mat ref(1, 96);
    for (int i = 0; i < 96; ++i) ref(0, i) = std::sin(0.37 * i) * 0.8;
    Mat est = ref;
    for (int i = 0; i < 96; ++i) est(0, i) += 0.2 * std::cos(1.1 * i);
    ad::GradCheckOptions opts;
    opts.fd_step = 1e-6;
    opts.tol = 1e-5;
    ad::GradCheckReport r = ad::grad_check(
        [&ref](Tape&, const Value& x) {
          return ad::taped_si_sdr(x, Value::constant(ref));
        },
        est, opts);
    print_gradcheck_line("si_sdr", r);
    all_passed = all_passed && r.passed;
  }

  {
    // the reconstruction-loss path at the requested unroll depth
    const StftConfig cfg{256, 64, 512, WindowKind::kPeriodicHann};
    MelFilterbank fb(40, 16000, 512, 0.0, 8000.0);
    ad::StftPlan plan = ad::make_stft_plan(cfg);
    GriffinLimConfig gl{iterations, PhaseInit::kZero, 0};

    Waveform tone;
    tone.sample_rate = 16000;
    tone.samples.resize(256 + 64 * 5);
    for (Eigen::Index i = 0; i < tone.samples.size(); ++i)
      tone.samples[i] = 0.5 * std::sin(0.21 * i) + 0.3 * std::sin(0.047 * i);
    MelSpectrogram target = mel_spectrum(amplitude(stft(tone, cfg)), fb);
    Waveform ref = reconstruct(target, fb, cfg, gl);
    Mat ref_row = ref.samples.transpose();
    // non-uniform ripple: a plain rescale would be invisible to the
    // scale-invariant loss
    Mat mel0 = target.values;
    for (Eigen::Index t = 0; t < mel0.rows(); ++t)
      for (Eigen::Index ch = 0; ch < mel0.cols(); ++ch)
        mel0(t, ch) *= 1.0 + 0.15 * std::sin(1.3 * t + 0.37 * ch);

    ad::GradCheckOptions opts;
    opts.fd_step = 1e-5;
    opts.tol = 1e-3;
    opts.value_floor = 1e-3;
    ad::GradCheckReport r = ad::grad_check(
        [&](Tape&, const Value& x) {
          return ad::taped_time_loss_from_mel(x, fb, plan, gl, ref_row);
        },
        mel0, opts);
    print_gradcheck_line("loss_t_reconstruction", r);
    all_passed = all_passed && r.passed;
  }

  std::cout << (all_passed ? "PASS" : "FAIL") << "\n";
  return all_passed ? 0 : 6;
}

int cmd_train(const std::string& config_path, const std::string& out,
              const std::string& log_path, const std::string& resume_path) {
  RunConfig cfg = parse_run_config(config_path);
  cfg.validate();

  SyntheticCorpus corpus = make_corpus(cfg.corpus_spec());
  std::optional<TrainerState> resume;
  if (!resume_path.empty()) resume = load_checkpoint(resume_path);

  TrainResult result =
      train(corpus, cfg.train_config(), cfg.model_config(), cfg.stft_config(),
            cfg.fmin, cfg.fmax_hz(), resume ? &*resume : nullptr);
  save_checkpoint(out, result.state);

  std::ostream* log_stream = &std::cout;
  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::trunc);
    if (!log_file)
      raise(ErrorKind::kInvalidInput, "cannot open log file: " + log_path);
    log_stream = &log_file;
  }
  for (const StepLog& s : result.log) {
    (*log_stream) << "{\"step\":" << s.step << ",\"loss_f\":" << fmt6(s.loss_f)
                  << ",\"loss_t\":" << fmt6(s.loss_t)
                  << ",\"total\":" << fmt6(s.total) << ",\"lr\":" << fmt6(s.lr)
                  << "}\n";
  }
  std::cout << "{\"steps\":" << result.log.size() << ",\"final_total\":"
            << (result.log.empty() ? "null" : fmt6(result.log.back().total))
            << ",\"checkpoint\":\"" << out << "\"}\n";
  return 0;
}

int cmd_synthesize(const std::string& ckpt, const std::string& tokens_text,
                   const std::string& out, int iterations,
                   const std::string& init, uint64_t seed, int frame_cap,
                   int sample_rate, const StftFlags& stft_flags, double fmin,
                   double fmax, int bits) {
  TrainerState state = load_checkpoint(ckpt);
  std::vector<int> tokens = parse_tokens(tokens_text);
  StftConfig cfg = stft_flags.resolve(sample_rate);
  GriffinLimConfig gl = gl_from_flags(iterations, init, seed);
  const double hi = fmax > 0.0 ? fmax : sample_rate / 2.0;
  Waveform w =
      synthesize(state, cfg, fmin, hi, sample_rate, tokens, gl, frame_cap);
  write_wav(out, w, bits);
  std::cout << "{\"samples\":" << w.samples.size()
            << ",\"sample_rate\":" << w.sample_rate
            << ",\"frame_cap\":" << frame_cap << "}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mel analysis, Griffin-Lim reconstruction, and joint "
               "time-frequency training tools"};
  app.require_subcommand(1);

  auto* extract = app.add_subcommand("extract", "wav -> mel feature file");
  std::string ex_in, ex_out;
  StftFlags ex_stft;
  MelFlags ex_mel;
  bool ex_norm = false;
  extract->add_option("--in", ex_in, "input wav")->required();
  extract->add_option("--out", ex_out, "output melf")->required();
  ex_stft.attach(extract);
  ex_mel.attach(extract);
  extract->add_flag("--normalize", ex_norm,
                    "store zero-mean unit-variance features with stats");

  auto* rec = app.add_subcommand("reconstruct", "mel feature file -> wav");
  std::string rec_in, rec_out, rec_init = "zero";
  int rec_iters = 64, rec_fft = 0, rec_bits = 16;
  uint64_t rec_seed = 0;
  double rec_fmin = 0.0, rec_fmax = 0.0;
  rec->add_option("--in", rec_in, "input melf")->required();
  rec->add_option("--out", rec_out, "output wav")->required();
  rec->add_option("--iterations", rec_iters, "griffin-lim iterations");
  rec->add_option("--init", rec_init, "phase init: zero or random");
  rec->add_option("--gl-seed", rec_seed, "seed for random phase init");
  rec->add_option("--fft", rec_fft, "FFT size override");
  rec->add_option("--fmin", rec_fmin, "filterbank fmin in Hz");
  rec->add_option("--fmax", rec_fmax, "filterbank fmax in Hz (0: sr/2)");
  rec->add_option("--bits", rec_bits, "wav bit depth: 16 or 32");

  auto* ev = app.add_subcommand("evaluate", "SI-SDR between two wav files");
  std::string ev_est, ev_ref;
  ev->add_option("--est", ev_est, "estimate wav")->required();
  ev->add_option("--ref", ev_ref, "reference wav")->required();

  auto* lo =
      app.add_subcommand("loss", "joint loss report from feature/wav files");
  std::string lo_pred, lo_target, lo_est, lo_ref;
  double lo_lambda = 1e-3;
  lo->add_option("--pred", lo_pred, "predicted melf")->required();
  lo->add_option("--target", lo_target, "target melf")->required();
  lo->add_option("--est", lo_est, "estimate wav (optional)");
  lo->add_option("--ref", lo_ref, "reference wav (optional)");
  lo->add_option("--lambda", lo_lambda, "time-domain loss weight");

  auto* gc = app.add_subcommand(
      "gradcheck", "verify tape gradients against finite differences");
  int gc_iters = 1;
  gc->add_option("--iterations", gc_iters, "griffin-lim unroll depth");

  auto* tr =
      app.add_subcommand("train", "joint-loss training on a synthetic corpus");
  std::string tr_cfg, tr_out, tr_log, tr_resume;
  tr->add_option("--config", tr_cfg, "run configuration file")->required();
  tr->add_option("--out", tr_out, "output checkpoint path")->required();
  tr->add_option("--log", tr_log, "per-step log file (default: stdout)");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");

  auto* sy = app.add_subcommand("synthesize", "checkpoint + tokens -> wav");
  std::string sy_ckpt, sy_tokens, sy_out, sy_init = "zero";
  int sy_iters = 64, sy_cap = 400, sy_sr = 16000, sy_bits = 16;
  uint64_t sy_seed = 0;
  StftFlags sy_stft;
  double sy_fmin = 0.0, sy_fmax = 0.0;
  sy->add_option("--ckpt", sy_ckpt, "checkpoint file")->required();
  sy->add_option("--tokens", sy_tokens, "token ids, e.g. \"3 1 4 1\"")
      ->required();
  sy->add_option("--out", sy_out, "output wav")->required();
  sy->add_option("--iterations", sy_iters, "griffin-lim iterations");
  sy->add_option("--init", sy_init, "phase init: zero or random");
  sy->add_option("--gl-seed", sy_seed, "seed for random phase init");
  sy->add_option("--frame-cap", sy_cap, "maximum frames to generate");
  sy->add_option("--sample-rate", sy_sr, "output sample rate in Hz");
  sy_stft.attach(sy);
  sy->add_option("--fmin", sy_fmin, "filterbank fmin in Hz");
  sy->add_option("--fmax", sy_fmax, "filterbank fmax in Hz (0: sr/2)");
  sy->add_option("--bits", sy_bits, "wav bit depth: 16 or 32");

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed())
      return cmd_extract(ex_in, ex_out, ex_stft, ex_mel, ex_norm);
    if (rec->parsed())
      return cmd_reconstruct(rec_in, rec_out, rec_iters, rec_init, rec_seed,
                             rec_fft, rec_fmin, rec_fmax, rec_bits);
    if (ev->parsed()) return cmd_evaluate(ev_est, ev_ref);
    if (lo->parsed())
      return cmd_loss(lo_pred, lo_target, lo_est, lo_ref, lo_lambda);
    if (gc->parsed()) return cmd_gradcheck(gc_iters);
    if (tr->parsed()) return cmd_train(tr_cfg, tr_out, tr_log, tr_resume);
    if (sy->parsed())
      return cmd_synthesize(sy_ckpt, sy_tokens, sy_out, sy_iters, sy_init,
                            sy_seed, sy_cap, sy_sr, sy_stft, sy_fmin, sy_fmax,
                            sy_bits);
  } catch (const Error& e) {
    std::cerr << "{\"error\":\"" << error_kind_name(e.kind())
              << "\",\"message\":\"" << e.what() << "\"}\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"internal\",\"message\":\"" << e.what()
              << "\"}\n";
    return 1;
  }
  return 1;
}

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace melwave {

namespace {

constexpr double kTokenSeconds = 0.1;

Mat sigm(const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  return out;
}

Mat softmax_col(const Mat& x) {
  const double mx = x.maxCoeff();
  Mat e = (x.array() - mx).exp();
  return e / e.sum();
}

struct GruWeights {
  const Mat *wz, *uz, *bz, *wr, *ur, *br, *wc, *uc, *bc;
};

Mat gru_step(const GruWeights& w, const Mat& x, const Mat& h) {
  Mat z = sigm(*w.wz * x + *w.uz * h + *w.bz);
  Mat r = sigm(*w.wr * x + *w.ur * h + *w.br);
  Mat c = ((*w.wc * x + *w.uc * r.cwiseProduct(h) + *w.bc).array().tanh());
  return (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(c);
}

struct TapedGru {
  ad::Value wz, uz, bz, wr, ur, br, wc, uc, bc;
};

ad::Value taped_gru_step(const TapedGru& w, const ad::Value& x,
                         const ad::Value& h) {
  using namespace ad;
  Value z = sigmoid(add(add(matmul(w.wz, x), matmul(w.uz, h)), w.bz));
  Value r = sigmoid(add(add(matmul(w.wr, x), matmul(w.ur, h)), w.br));
  Value c = tanh(add(add(matmul(w.wc, x), matmul(w.uc, mul(r, h))), w.bc));
  Value one_minus_z = add_scalar(scale(z, -1.0), 1.0);
  return add(mul(one_minus_z, h), mul(z, c));
}

void check_tokens(const std::vector<int>& tokens, int vocab) {
  if (tokens.empty())
    raise(ErrorKind::kInvalidInput, "empty token sequence");
  for (int t : tokens)
    if (t < 0 || t >= vocab)
      raise(ErrorKind::kInvalidInput, "token id out of vocabulary");
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t x = a + 0x9E3779B97F4A7C15ull * (b + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  return x;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 1 || embed_dim < 1 || enc_dim < 1 || dec_dim < 1 ||
      n_mels < 1)
    raise(ErrorKind::kInvalidConfig, "model dimensions must be >= 1");
}

void TrainConfig::validate() const {
  if (epochs < 1) raise(ErrorKind::kInvalidConfig, "epochs must be >= 1");
  if (batch_size < 1)
    raise(ErrorKind::kInvalidConfig, "batch_size must be >= 1");
  if (!(lr_start > 0.0 && lr_end > 0.0))
    raise(ErrorKind::kInvalidConfig, "learning rates must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    raise(ErrorKind::kInvalidConfig, "adam betas must lie in (0, 1)");
  if (adam_eps <= 0.0) raise(ErrorKind::kInvalidConfig, "adam_eps must be > 0");
  if (l2_weight < 0.0)
    raise(ErrorKind::kInvalidConfig, "l2_weight must be >= 0");
  if (lambda < 0.0) raise(ErrorKind::kInvalidConfig, "lambda must be >= 0");
  if (gl_train_iterations < 1)
    raise(ErrorKind::kInvalidConfig, "gl_train_iterations must be >= 1");
}

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const int e = cfg.embed_dim, he = cfg.enc_dim, hd = cfg.dec_dim,
            nm = cfg.n_mels;
  const int dec_in = nm + he;
  p.embedding.resize(cfg.vocab_size, e);
  p.enc_wz.resize(he, e); p.enc_uz.resize(he, he); p.enc_bz = Mat::Zero(he, 1);
  p.enc_wr.resize(he, e); p.enc_ur.resize(he, he); p.enc_br = Mat::Zero(he, 1);
  p.enc_wc.resize(he, e); p.enc_uc.resize(he, he); p.enc_bc = Mat::Zero(he, 1);
  p.attn_wq.resize(he, hd);
  p.dec_wz.resize(hd, dec_in); p.dec_uz.resize(hd, hd); p.dec_bz = Mat::Zero(hd, 1);
  p.dec_wr.resize(hd, dec_in); p.dec_ur.resize(hd, hd); p.dec_br = Mat::Zero(hd, 1);
  p.dec_wc.resize(hd, dec_in); p.dec_uc.resize(hd, hd); p.dec_bc = Mat::Zero(hd, 1);
  p.out_w.resize(nm, hd);
  p.out_b = Mat::Zero(nm, 1);

  std::mt19937_64 rng(seed);
  for (auto& [name, mat] : p.tensors()) {
    if (name.find("_b") != std::string::npos) continue;  // biases stay zero
    const double s = 1.0 / std::sqrt(static_cast<double>(mat->cols()));
    std::uniform_real_distribution<double> uni(-s, s);
    for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = uni(rng);
  }
  return p;
}

std::vector<std::pair<std::string, Mat*>> ModelParams::tensors() {
  return {
      {"embedding", &embedding},
      {"enc_wz", &enc_wz}, {"enc_uz", &enc_uz}, {"enc_bz", &enc_bz},
      {"enc_wr", &enc_wr}, {"enc_ur", &enc_ur}, {"enc_br", &enc_br},
      {"enc_wc", &enc_wc}, {"enc_uc", &enc_uc}, {"enc_bc", &enc_bc},
      {"attn_wq", &attn_wq},
      {"dec_wz", &dec_wz}, {"dec_uz", &dec_uz}, {"dec_bz", &dec_bz},
      {"dec_wr", &dec_wr}, {"dec_ur", &dec_ur}, {"dec_br", &dec_br},
      {"dec_wc", &dec_wc}, {"dec_uc", &dec_uc}, {"dec_bc", &dec_bc},
      {"out_w", &out_w}, {"out_b", &out_b},
  };
}

std::vector<std::pair<std::string, const Mat*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Mat*>> out;
  for (auto& [name, mat] : const_cast<ModelParams*>(this)->tensors())
    out.emplace_back(name, mat);
  return out;
}

void ModelParams::validate() const {
  config.validate();
  for (auto& [name, mat] : tensors())
    if (!mat->allFinite())
      raise(ErrorKind::kInvalidInput, "parameter " + name + " is non-finite");
}

Mat forward_mel(const ModelParams& params, const std::vector<int>& tokens,
                const Mat* teacher, int frame_cap) {
  const ModelConfig& cfg = params.config;
  check_tokens(tokens, cfg.vocab_size);
  if (teacher) {
    if (teacher->rows() < 1)
      raise(ErrorKind::kInvalidInput, "teacher needs at least one frame");
    if (teacher->cols() != cfg.n_mels)
      raise(ErrorKind::kInvalidInput, "teacher channel mismatch");
  } else if (frame_cap <= 0) {
    raise(ErrorKind::kEmptyOutput, "frame cap must be >= 1 when free-running");
  }

  const GruWeights enc{&params.enc_wz, &params.enc_uz, &params.enc_bz,
                       &params.enc_wr, &params.enc_ur, &params.enc_br,
                       &params.enc_wc, &params.enc_uc, &params.enc_bc};
  const GruWeights dec{&params.dec_wz, &params.dec_uz, &params.dec_bz,
                       &params.dec_wr, &params.dec_ur, &params.dec_br,
                       &params.dec_wc, &params.dec_uc, &params.dec_bc};

  const int T = static_cast<int>(tokens.size());
  Mat H(cfg.enc_dim, T);
  Mat h = Mat::Zero(cfg.enc_dim, 1);
  for (int t = 0; t < T; ++t) {
    Mat x = params.embedding.row(tokens[t]).transpose();
    h = gru_step(enc, x, h);
    H.col(t) = h;
  }

  const Eigen::Index frames = teacher ? teacher->rows() : frame_cap;
  Mat out(frames, cfg.n_mels);
  Mat s = Mat::Zero(cfg.dec_dim, 1);
  Mat y_prev = Mat::Zero(cfg.n_mels, 1);
  for (Eigen::Index j = 0; j < frames; ++j) {
    Mat q = params.attn_wq * s;
    Mat scores = H.transpose() * q;
    Mat a = softmax_col(scores);
    Mat ctx = H * a;
    Mat x(cfg.n_mels + cfg.enc_dim, 1);
    x.topRows(cfg.n_mels) = y_prev;
    x.bottomRows(cfg.enc_dim) = ctx;
    s = gru_step(dec, x, s);
    Mat y = params.out_w * s + params.out_b;
    out.row(j) = y.transpose();
    y_prev = teacher ? Mat(teacher->row(j).transpose()) : y;
  }
  return out;
}

const ad::Value& ParamLeaves::at(const std::string& name) const {
  for (auto& [n, v] : leaves)
    if (n == name) return v;
  raise(ErrorKind::kInvalidInput, "unknown parameter leaf " + name);
}

ParamLeaves make_param_leaves(ad::Tape& tape, const ModelParams& params) {
  ParamLeaves out;
  for (auto& [name, mat] : params.tensors())
    out.leaves.emplace_back(name, tape.input(*mat));
  return out;
}

ad::Value taped_forward_mel(ad::Tape& tape, const ParamLeaves& leaves,
                            const ModelConfig& cfg,
                            const std::vector<int>& tokens,
                            const Mat& teacher) {
  using namespace ad;
  check_tokens(tokens, cfg.vocab_size);
  if (teacher.rows() < 1 || teacher.cols() != cfg.n_mels)
    raise(ErrorKind::kInvalidInput, "teacher shape mismatch");

  const TapedGru enc{leaves.at("enc_wz"), leaves.at("enc_uz"), leaves.at("enc_bz"),
                     leaves.at("enc_wr"), leaves.at("enc_ur"), leaves.at("enc_br"),
                     leaves.at("enc_wc"), leaves.at("enc_uc"), leaves.at("enc_bc")};
  const TapedGru dec{leaves.at("dec_wz"), leaves.at("dec_uz"), leaves.at("dec_bz"),
                     leaves.at("dec_wr"), leaves.at("dec_ur"), leaves.at("dec_br"),
                     leaves.at("dec_wc"), leaves.at("dec_uc"), leaves.at("dec_bc")};

  std::vector<int> rows(tokens.begin(), tokens.end());
  Value emb = take_rows(leaves.at("embedding"), rows);  // T x embed

  Value h = Value::constant(Mat::Zero(cfg.enc_dim, 1));
  std::vector<Value> enc_states;
  enc_states.reserve(tokens.size());
  for (size_t t = 0; t < tokens.size(); ++t) {
    Value x = transpose(take_rows(emb, {static_cast<int>(t)}));
    h = taped_gru_step(enc, x, h);
    enc_states.push_back(h);
  }
  Value henc = stack_cols(enc_states);  // enc_dim x T

  Value s = Value::constant(Mat::Zero(cfg.dec_dim, 1));
  Value y_prev = Value::constant(Mat::Zero(cfg.n_mels, 1));
  std::vector<Value> outs;
  outs.reserve(teacher.rows());
  for (Eigen::Index j = 0; j < teacher.rows(); ++j) {
    Value q = matmul(leaves.at("attn_wq"), s);
    Value scores = matmul(henc, q, /*trans_a=*/true);
    Value attn = softmax_vec(scores);
    Value ctx = matmul(henc, attn);
    Value x = vstack(y_prev, ctx);
    s = taped_gru_step(dec, x, s);
    Value y = add(matmul(leaves.at("out_w"), s), leaves.at("out_b"));
    outs.push_back(y);
    y_prev = Value::constant(Mat(teacher.row(j).transpose()));
  }
  (void)tape;
  return transpose(stack_cols(outs));  // frames x n_mels
}

// ---------------------------------------------------------------------------
// synthetic corpus

void CorpusSpec::validate() const {
  if (size < 1) raise(ErrorKind::kInvalidConfig, "corpus size must be >= 1");
  if (vocab_size < 1)
    raise(ErrorKind::kInvalidConfig, "vocab_size must be >= 1");
  if (!(min_duration_s > 0.0 && min_duration_s <= max_duration_s))
    raise(ErrorKind::kInvalidConfig, "bad duration bounds");
  if (sample_rate <= 0)
    raise(ErrorKind::kInvalidConfig, "sample_rate must be > 0");
}

Vec token_pattern(const CorpusSpec& spec, int token) {
  spec.validate();
  if (token < 0 || token >= spec.vocab_size)
    raise(ErrorKind::kInvalidInput, "token id out of vocabulary");
  const int sr = spec.sample_rate;
  const int len = std::max(2, static_cast<int>(std::lround(kTokenSeconds * sr)));
  Vec out(len);

  std::mt19937_64 rng(mix_seed(spec.seed, static_cast<uint64_t>(token)));
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  const double lo = 150.0;
  const double hi = std::max(lo * 2.0, 0.35 * sr);
  const double frac =
      spec.vocab_size > 1
          ? static_cast<double>(token) / (spec.vocab_size - 1)
          : 0.0;
  const double f0 = lo * std::pow(hi / lo, frac);
  const double chirp = ((token % 3) - 1) * 0.08;
  double f1 = f0;
  double f2 = f0 * 2.37;
  while (f2 > 0.45 * sr) f2 *= 0.5;
  const bool noise_token = (token % 4) == 3;

  double phi1 = 0.0, phi2 = 0.0;
  for (int n = 0; n < len; ++n) {
    const double env = std::sin(std::numbers::pi * (n + 0.5) / len);
    if (noise_token) {
      out[n] = 0.25 * env * uni(rng);
    } else {
      const double sweep = 1.0 + chirp * (static_cast<double>(n) / len - 0.5);
      phi1 += f1 * sweep / sr;
      phi2 += f2 * sweep / sr;
      out[n] = 0.3 * env *
               (std::sin(2.0 * std::numbers::pi * phi1) +
                0.5 * std::sin(2.0 * std::numbers::pi * phi2));
    }
  }
  return out;
}

SyntheticCorpus make_corpus(const CorpusSpec& spec) {
  spec.validate();
  const int sr = spec.sample_rate;
  const int len_tok = std::max(2, static_cast<int>(std::lround(kTokenSeconds * sr)));
  const int nmin = std::max<int>(
      1, static_cast<int>(std::ceil(spec.min_duration_s * sr / len_tok)));
  const int nmax =
      static_cast<int>(std::floor(spec.max_duration_s * sr / len_tok));
  if (nmax < nmin)
    raise(ErrorKind::kInvalidConfig,
          "infeasible duration bounds for 100 ms token patterns");

  std::vector<Vec> patterns(spec.vocab_size);
  for (int v = 0; v < spec.vocab_size; ++v) patterns[v] = token_pattern(spec, v);

  SyntheticCorpus corpus;
  corpus.spec = spec;
  corpus.utterances.resize(spec.size);
  std::mt19937_64 rng(mix_seed(spec.seed, 0xC0FFEEull));
  std::uniform_int_distribution<int> count(nmin, nmax);
  std::uniform_int_distribution<int> pick(0, spec.vocab_size - 1);
  for (int u = 0; u < spec.size; ++u) {
    Utterance& utt = corpus.utterances[u];
    const int n = count(rng);
    utt.tokens.resize(n);
    utt.audio.sample_rate = sr;
    utt.audio.samples.resize(static_cast<Eigen::Index>(n) * len_tok);
    for (int i = 0; i < n; ++i) {
      utt.tokens[i] = pick(rng);
      utt.audio.samples.segment(static_cast<Eigen::Index>(i) * len_tok,
                                len_tok) = patterns[utt.tokens[i]];
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// training

double learning_rate_at(const TrainConfig& cfg, int64_t step,
                        int64_t total_steps) {
  const int64_t s0 = cfg.lr_decay_start_step >= 0 ? cfg.lr_decay_start_step
                                                  : total_steps / 10;
  if (step < s0 || total_steps <= s0) return cfg.lr_start;
  double frac = static_cast<double>(step + 1 - s0) /
                static_cast<double>(total_steps - s0);
  frac = std::min(frac, 1.0);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

void adam_update(Mat& param, Mat& m, Mat& v, const Mat& grad,
                 const TrainConfig& cfg, int64_t t, double lr) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  Mat mhat = m / bc1;
  Mat vhat = v / bc2;
  param -= lr * mhat.cwiseQuotient(
                    (vhat.cwiseSqrt().array() + cfg.adam_eps).matrix());
}

std::vector<int> epoch_order(uint64_t seed, int64_t epoch, int corpus_size) {
  std::vector<int> order(corpus_size);
  for (int i = 0; i < corpus_size; ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(epoch) + 0x5EEDull));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrainResult train(const SyntheticCorpus& corpus, const TrainConfig& tcfg,
                  const ModelConfig& mcfg, const StftConfig& stft_cfg,
                  double fmin, double fmax, const TrainerState* resume,
                  int64_t stop_after_step) {
  tcfg.validate();
  mcfg.validate();
  stft_cfg.validate();
  if (corpus.utterances.empty())
    raise(ErrorKind::kInvalidInput, "training corpus is empty");

  const int sr = corpus.spec.sample_rate;
  const MelFilterbank fb(mcfg.n_mels, sr, stft_cfg.fft_size, fmin, fmax);
  const ad::StftPlan plan = ad::make_stft_plan(stft_cfg);
  // One griffin-lim configuration drives both transformation pairs.
  const GriffinLimConfig gl_train{tcfg.gl_train_iterations, PhaseInit::kZero, 0};

  const int n_utt = static_cast<int>(corpus.utterances.size());
  std::vector<MelSpectrogram> y_raw(n_utt);
  for (int u = 0; u < n_utt; ++u)
    y_raw[u] = mel_spectrum(amplitude(stft(corpus.utterances[u].audio, stft_cfg)), fb);

  NormStats stats;
  if (resume) {
    stats = resume->stats;
  } else {
    std::vector<const MelSpectrogram*> ptrs;
    for (auto& m : y_raw) ptrs.push_back(&m);
    stats = fit_norm_stats(ptrs);
  }

  std::vector<Mat> y_norm(n_utt);
  for (int u = 0; u < n_utt; ++u)
    y_norm[u] = normalize(y_raw[u], stats).values;

  std::vector<Mat> ref_wave(n_utt);
  if (tcfg.time_loss) {
    for (int u = 0; u < n_utt; ++u) {
      AmplitudeSpectrogram A = epsilon_amplitude(y_raw[u], fb, stft_cfg);
      Waveform w = istft(griffin_lim(A, gl_train), sr);
      ref_wave[u] = w.samples.transpose();
    }
  }

  TrainResult result;
  if (resume) {
    result.state = *resume;
    if (!(result.state.params.config == mcfg))
      raise(ErrorKind::kInvalidInput, "resume checkpoint dimension mismatch");
    result.state.params.validate();
  } else {
    result.state.params = ModelParams::init(mcfg, tcfg.seed);
    result.state.stats = stats;
    result.state.step = 0;
  }

  auto tensors = result.state.params.tensors();
  const size_t n_tensors = tensors.size();
  AdamState& adam = result.state.adam;
  if (adam.m.empty()) {
    adam.m.resize(n_tensors);
    adam.v.resize(n_tensors);
    for (size_t i = 0; i < n_tensors; ++i) {
      adam.m[i] = Mat::Zero(tensors[i].second->rows(), tensors[i].second->cols());
      adam.v[i] = Mat::Zero(tensors[i].second->rows(), tensors[i].second->cols());
    }
  }

  const int64_t bpe = (n_utt + tcfg.batch_size - 1) / tcfg.batch_size;
  const int64_t total_steps = static_cast<int64_t>(tcfg.epochs) * bpe;
  const int64_t last_step =
      stop_after_step >= 0 ? std::min(stop_after_step, total_steps) : total_steps;

  ad::Tape tape;
  for (int64_t step = result.state.step; step < last_step; ++step) {
    const int64_t epoch = step / bpe;
    const int64_t slot = step % bpe;
    const std::vector<int> order = epoch_order(tcfg.seed, epoch, n_utt);
    const int lo = static_cast<int>(slot) * tcfg.batch_size;
    const int hi = std::min(lo + tcfg.batch_size, n_utt);

    tape.reset();
    ParamLeaves leaves = make_param_leaves(tape, result.state.params);

    ad::Value lf_acc, lt_acc;
    for (int b = lo; b < hi; ++b) {
      const int u = order[b];
      const Utterance& utt = corpus.utterances[u];
      ad::Value pred =
          taped_forward_mel(tape, leaves, mcfg, utt.tokens, y_norm[u]);
      ad::Value lf_u = ad::taped_loss_f(pred, ad::Value::constant(y_norm[u]));
      lf_acc = lf_acc.is_empty() ? lf_u : ad::add(lf_acc, lf_u);
      if (tcfg.time_loss) {
        ad::Value mel_raw = ad::taped_denormalize(pred, stats);
        ad::Value amp = ad::taped_epsilon_amplitude(mel_raw, fb);
        ad::SpecVar spec = ad::taped_griffin_lim(amp, plan, gl_train);
        ad::Value wave = ad::taped_istft(spec, plan);
        ad::Value lt_u = ad::taped_loss_t(wave, ad::Value::constant(ref_wave[u]));
        lt_acc = lt_acc.is_empty() ? lt_u : ad::add(lt_acc, lt_u);
      }
    }
    const double inv_batch = 1.0 / static_cast<double>(hi - lo);
    ad::Value lf = ad::scale(lf_acc, inv_batch);
    ad::Value lt;
    if (tcfg.time_loss) lt = ad::scale(lt_acc, inv_batch);
    ad::Value total = (tcfg.time_loss && tcfg.lambda > 0.0)
                          ? ad::add(lf, ad::scale(lt, tcfg.lambda))
                          : lf;

    const double lr = learning_rate_at(tcfg, step, total_steps);
    StepLog log{step, lf.val()(0, 0),
                tcfg.time_loss ? lt.val()(0, 0) : 0.0, total.val()(0, 0), lr};
    result.log.push_back(log);
    if (!std::isfinite(log.total))
      raise(ErrorKind::kTrainingFailure,
            "training diverged at step " + std::to_string(step));

    tape.backward(total);

    adam.t += 1;
    for (size_t i = 0; i < n_tensors; ++i) {
      Mat g = tape.adjoint(leaves.leaves[i].second);
      if (tcfg.l2_weight > 0.0) g += tcfg.l2_weight * (*tensors[i].second);
      adam_update(*tensors[i].second, adam.m[i], adam.v[i], g, tcfg, adam.t, lr);
    }
    result.state.step = step + 1;
  }
  return result;
}

Waveform synthesize(const TrainerState& state, const StftConfig& stft_cfg,
                    double fmin, double fmax, int sample_rate,
                    const std::vector<int>& tokens,
                    const GriffinLimConfig& glcfg, int frame_cap) {
  state.params.validate();
  if (frame_cap <= 0)
    raise(ErrorKind::kEmptyOutput, "synthesis frame cap must be >= 1");
  const MelFilterbank fb(state.params.config.n_mels, sample_rate,
                         stft_cfg.fft_size, fmin, fmax);
  Mat pred = forward_mel(state.params, tokens, nullptr, frame_cap);
  MelSpectrogram m;
  m.values = pred;
  m.normalized = true;
  m.stats = state.stats;
  return reconstruct(m, fb, stft_cfg, glcfg);
}

EvalResult evaluate_teacher_forced(const TrainerState& state,
                                   const SyntheticCorpus& corpus,
                                   const StftConfig& stft_cfg, double fmin,
                                   double fmax, const GriffinLimConfig& glcfg) {
  const int sr = corpus.spec.sample_rate;
  const MelFilterbank fb(state.params.config.n_mels, sr, stft_cfg.fft_size,
                         fmin, fmax);
  EvalResult r;
  for (const Utterance& utt : corpus.utterances) {
    MelSpectrogram target_raw =
        mel_spectrum(amplitude(stft(utt.audio, stft_cfg)), fb);
    MelSpectrogram target_norm = normalize(target_raw, state.stats);
    Mat pred = forward_mel(state.params, utt.tokens, &target_norm.values, 0);
    MelSpectrogram pred_norm;
    pred_norm.values = pred;
    pred_norm.normalized = true;
    pred_norm.stats = state.stats;
    r.mean_loss_f += loss_f(pred_norm, target_norm);

    Waveform ref = reconstruct(target_raw, fb, stft_cfg, glcfg);
    Waveform est = reconstruct(pred_norm, fb, stft_cfg, glcfg);
    r.mean_si_sdr_db += si_sdr(est, ref);
    ++r.utterances;
  }
  if (r.utterances > 0) {
    r.mean_loss_f /= r.utterances;
    r.mean_si_sdr_db /= r.utterances;
  }
  return r;
}

}  // namespace melwave

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "melwave/diffsignal.hpp"
#include "melwave/loss.hpp"
#include "melwave/mel.hpp"
#include "melwave/phase.hpp"

namespace melwave {

struct ModelConfig {
  int vocab_size = 16;
  int embed_dim = 16;
  int enc_dim = 32;
  int dec_dim = 32;
  int n_mels = 80;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Gated recurrent encoder over token embeddings, dot-product attention,
// gated recurrent decoder over [previous frame; context], linear projection
// to mel channels.
struct ModelParams {
  ModelConfig config;

  Mat embedding;                            // vocab x embed
  Mat enc_wz, enc_uz, enc_wr, enc_ur, enc_wc, enc_uc;
  Mat enc_bz, enc_br, enc_bc;               // enc_dim x 1
  Mat attn_wq;                              // enc_dim x dec_dim
  Mat dec_wz, dec_uz, dec_wr, dec_ur, dec_wc, dec_uc;
  Mat dec_bz, dec_br, dec_bc;               // dec_dim x 1
  Mat out_w;                                // n_mels x dec_dim
  Mat out_b;                                // n_mels x 1

  static ModelParams init(const ModelConfig& cfg, uint64_t seed);

  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;
  void validate() const;
};

// Normalized-domain mel prediction. With a teacher the decoder consumes the
// previous target frame and the output matches its frame count; without one
// it feeds back its own frames up to frame_cap.
Mat forward_mel(const ModelParams& params, const std::vector<int>& tokens,
                const Mat* teacher, int frame_cap);

// Taped twin of forward_mel used by the trainer (teacher forcing only).
struct ParamLeaves {
  std::vector<std::pair<std::string, ad::Value>> leaves;
  const ad::Value& at(const std::string& name) const;
};
ParamLeaves make_param_leaves(ad::Tape& tape, const ModelParams& params);
ad::Value taped_forward_mel(ad::Tape& tape, const ParamLeaves& leaves,
                            const ModelConfig& cfg,
                            const std::vector<int>& tokens, const Mat& teacher);

// --- synthetic corpus --------------------------------------------------------

struct CorpusSpec {
  int size = 64;
  int vocab_size = 16;
  double min_duration_s = 1.0;
  double max_duration_s = 3.0;
  int sample_rate = 16000;
  uint64_t seed = 0;

  void validate() const;
};

struct Utterance {
  std::vector<int> tokens;
  Waveform audio;
};

struct SyntheticCorpus {
  CorpusSpec spec;
  std::vector<Utterance> utterances;
};

// Deterministic waveform for one token id: a fixed chirped two-partial tone
// or noise burst with an attack/decay envelope, 100 ms at the corpus rate.
Vec token_pattern(const CorpusSpec& spec, int token);

// Utterances are concatenations of token patterns; token count is drawn so
// the duration stays inside the configured bounds.
SyntheticCorpus make_corpus(const CorpusSpec& spec);

// --- training ----------------------------------------------------------------

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  int lr_decay_start_step = -1;  // -1: decay starts at 10% of total steps
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double l2_weight = 1e-6;
  double lambda = 1e-3;
  int gl_train_iterations = 1;
  // false builds the frequency-only trainer: no reconstruction at all.
  bool time_loss = true;
  uint64_t seed = 1;

  void validate() const;
};

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  int64_t t = 0;
};

struct TrainerState {
  ModelParams params;
  AdamState adam;
  NormStats stats;
  int64_t step = 0;
};

struct StepLog {
  int64_t step;
  double loss_f;
  double loss_t;
  double total;
  double lr;
};

struct TrainResult {
  TrainerState state;
  std::vector<StepLog> log;
};

// Learning rate at a 0-based step: constant until decay_start, then
// exponential interpolation reaching lr_end on the final step.
double learning_rate_at(const TrainConfig& cfg, int64_t step,
                        int64_t total_steps);

// One bias-corrected Adam update; t counts updates starting at 1. L2 decay
// is part of the gradient the trainer passes in.
void adam_update(Mat& param, Mat& m, Mat& v, const Mat& grad,
                 const TrainConfig& cfg, int64_t t, double lr);

// Shuffled utterance order for one epoch; derived from (seed, epoch) only,
// so a checkpointed step counter fully determines the batch sequence.
std::vector<int> epoch_order(uint64_t seed, int64_t epoch, int corpus_size);

// Joint-loss training over the synthetic corpus. Both waveform branches
// (prediction and target) run griffin_lim with the same configuration; the
// target branch is outside the gradient path. stop_after_step >= 0 halts an
// otherwise identical run early (the decay schedule still spans all epochs),
// which is how mid-run checkpoints are produced.
TrainResult train(const SyntheticCorpus& corpus, const TrainConfig& tcfg,
                  const ModelConfig& mcfg, const StftConfig& stft_cfg,
                  double fmin, double fmax,
                  const TrainerState* resume = nullptr,
                  int64_t stop_after_step = -1);

// Free-running prediction followed by reconstruction.
Waveform synthesize(const TrainerState& state, const StftConfig& stft_cfg,
                    double fmin, double fmax, int sample_rate,
                    const std::vector<int>& tokens,
                    const GriffinLimConfig& glcfg, int frame_cap);

struct EvalResult {
  double mean_si_sdr_db = 0.0;
  double mean_loss_f = 0.0;
  int utterances = 0;
};

// Teacher-forced predictions on a held-out corpus; SI-SDR is measured
// between the reconstruction of the prediction and the reconstruction of
// the target mel, both with the same griffin-lim configuration.
EvalResult evaluate_teacher_forced(const TrainerState& state,
                                   const SyntheticCorpus& corpus,
                                   const StftConfig& stft_cfg, double fmin,
                                   double fmax,
                                   const GriffinLimConfig& glcfg);

}  // namespace melwave

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "melwave/mel.hpp"
#include "melwave/model.hpp"
#include "melwave/signal.hpp"

namespace melwave {

// --- WAV (RIFF mono, PCM16 or IEEE float32) ----------------------------------

Waveform read_wav(const std::string& path);
// bit_depth 16: round-half-away-from-zero quantization to int16 (x * 32768);
// bit_depth 32: IEEE float32 passthrough.
void write_wav(const std::string& path, const Waveform& w, int bit_depth);

// --- MELF feature files -------------------------------------------------------
//
// layout (little-endian):
//   "MELF" | version u32 | n_frames u32 | n_mels u32 | sample_rate u32 |
//   hop u32 | win u32 | normalized u8 |
//   [mean f64 x n_mels | std f64 x n_mels when normalized] |
//   payload f64 row-major n_frames x n_mels

inline constexpr uint32_t kMelFileVersion = 1;

struct MelFile {
  MelSpectrogram mel;
  int sample_rate = 0;
  int hop_length = 0;
  int win_length = 0;
};

MelFile read_mel(const std::string& path);
void write_mel(const std::string& path, const MelSpectrogram& mel,
               int sample_rate, int hop_length, int win_length);

// --- checkpoints ---------------------------------------------------------------
//
// "MWCK" | version u32 | sections of
//   name_len u32 | name | rows u32 | cols u32 | f64 data
// Sections cover every parameter tensor, the Adam moments, NormStats and the
// step counters. Model dimensions are recovered from tensor shapes.

void save_checkpoint(const std::string& path, const TrainerState& state);
TrainerState load_checkpoint(const std::string& path);

// --- flat key = value run configuration ----------------------------------------

struct RunConfig {
  int sample_rate = 16000;
  int win_length = 0;  // 0: 50 ms at sample_rate
  int hop_length = 0;  // 0: 12.5 ms at sample_rate
  int fft_size = 0;    // 0: next power of two >= win
  WindowKind window = WindowKind::kPeriodicHann;

  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 0.0;  // 0: sample_rate / 2

  int gl_train_iterations = 1;
  int gl_runtime_iterations = 64;
  PhaseInit gl_init = PhaseInit::kZero;
  uint64_t gl_seed = 0;

  int epochs = 10;
  int batch_size = 32;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  int lr_decay_start_step = -1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double l2_weight = 1e-6;
  double lambda = 1e-3;
  uint64_t seed = 1;
  bool time_loss = true;

  int corpus_size = 64;
  int vocab_size = 16;
  double min_duration_s = 1.0;
  double max_duration_s = 3.0;

  int embed_dim = 16;
  int enc_dim = 32;
  int dec_dim = 32;

  int frame_cap = 400;

  StftConfig stft_config() const;
  CorpusSpec corpus_spec() const;
  TrainConfig train_config() const;
  ModelConfig model_config() const;
  GriffinLimConfig gl_runtime() const;
  double fmax_hz() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
  // Runs every derived validate(); throws before any computation happens.
  void validate() const;
};

// Parses "key = value" lines ('#' comments); unknown keys are rejected.
RunConfig parse_run_config(const std::string& path);
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);

}  // namespace melwave

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace melwave {

namespace {

// On-disk integers are little-endian; this codebase targets little-endian
// hosts and reads/writes them directly.

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) raise(ErrorKind::kCorruptFile, std::string("truncated ") + what);
  return v;
}

void put_tag(std::ostream& os, const char tag[4]) { os.write(tag, 4); }

std::string get_tag(std::istream& is, const char* what) {
  char buf[4];
  is.read(buf, 4);
  if (!is) raise(ErrorKind::kCorruptFile, std::string("truncated ") + what);
  return std::string(buf, 4);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) raise(ErrorKind::kInvalidInput, "cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::kInvalidInput, "cannot open for reading: " + path);
  return is;
}

}  // namespace

// ---------------------------------------------------------------------------
// WAV

Waveform read_wav(const std::string& path) {
  std::ifstream is = open_in(path);
  if (get_tag(is, "wav header") != "RIFF")
    raise(ErrorKind::kUnsupportedFormat, "not a RIFF file: " + path);
  get<uint32_t>(is, "wav header");
  if (get_tag(is, "wav header") != "WAVE")
    raise(ErrorKind::kUnsupportedFormat, "not a WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  while (true) {
    char tag_buf[4];
    is.read(tag_buf, 4);
    if (!is) raise(ErrorKind::kCorruptFile, "wav ends before data chunk");
    std::string tag(tag_buf, 4);
    uint32_t chunk_size = get<uint32_t>(is, "chunk size");
    if (tag == "fmt ") {
      if (chunk_size < 16)
        raise(ErrorKind::kCorruptFile, "fmt chunk too small");
      format = get<uint16_t>(is, "fmt");
      channels = get<uint16_t>(is, "fmt");
      sample_rate = get<uint32_t>(is, "fmt");
      get<uint32_t>(is, "fmt");  // byte rate
      get<uint16_t>(is, "fmt");  // block align
      bits = get<uint16_t>(is, "fmt");
      is.seekg(chunk_size - 16 + (chunk_size & 1), std::ios::cur);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt)
        raise(ErrorKind::kCorruptFile, "data chunk before fmt chunk");
      if (channels != 1)
        raise(ErrorKind::kUnsupportedFormat, "only mono wav is supported");
      Waveform w;
      w.sample_rate = static_cast<int>(sample_rate);
      if (format == 1 && bits == 16) {
        const uint32_t n = chunk_size / 2;
        std::vector<int16_t> raw(n);
        is.read(reinterpret_cast<char*>(raw.data()), n * 2);
        if (!is) raise(ErrorKind::kCorruptFile, "truncated wav data");
        w.samples.resize(n);
        for (uint32_t i = 0; i < n; ++i) w.samples[i] = raw[i] / 32768.0;
      } else if (format == 3 && bits == 32) {
        const uint32_t n = chunk_size / 4;
        std::vector<float> raw(n);
        is.read(reinterpret_cast<char*>(raw.data()), n * 4);
        if (!is) raise(ErrorKind::kCorruptFile, "truncated wav data");
        w.samples.resize(n);
        for (uint32_t i = 0; i < n; ++i) w.samples[i] = raw[i];
      } else {
        raise(ErrorKind::kUnsupportedFormat,
              "unsupported wav codec (need PCM16 or float32)");
      }
      return w;
    } else {
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
      if (!is) raise(ErrorKind::kCorruptFile, "truncated wav chunk");
    }
  }
}

void write_wav(const std::string& path, const Waveform& w, int bit_depth) {
  if (w.sample_rate <= 0)
    raise(ErrorKind::kInvalidInput, "waveform sample_rate must be > 0");
  if (!w.samples.allFinite())
    raise(ErrorKind::kInvalidInput, "waveform contains non-finite samples");
  if (bit_depth != 16 && bit_depth != 32)
    raise(ErrorKind::kUnsupportedFormat, "wav bit depth must be 16 or 32");

  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint16_t bytes = bit_depth == 16 ? 2 : 4;
  const uint32_t data_size = n * bytes;

  std::ofstream os = open_out(path);
  put_tag(os, "RIFF");
  put<uint32_t>(os, 36 + data_size);
  put_tag(os, "WAVE");
  put_tag(os, "fmt ");
  put<uint32_t>(os, 16);
  put<uint16_t>(os, bit_depth == 16 ? 1 : 3);
  put<uint16_t>(os, 1);
  put<uint32_t>(os, static_cast<uint32_t>(w.sample_rate));
  put<uint32_t>(os, static_cast<uint32_t>(w.sample_rate) * bytes);
  put<uint16_t>(os, bytes);
  put<uint16_t>(os, static_cast<uint16_t>(bit_depth));
  put_tag(os, "data");
  put<uint32_t>(os, data_size);
  if (bit_depth == 16) {
    for (uint32_t i = 0; i < n; ++i) {
      const long long q = std::llround(w.samples[i] * 32768.0);
      put<int16_t>(os, static_cast<int16_t>(std::clamp<long long>(q, -32768, 32767)));
    }
  } else {
    for (uint32_t i = 0; i < n; ++i)
      put<float>(os, static_cast<float>(w.samples[i]));
  }
  if (!os) raise(ErrorKind::kInvalidInput, "failed writing " + path);
}

// ---------------------------------------------------------------------------
// MELF

MelFile read_mel(const std::string& path) {
  std::ifstream is = open_in(path);
  if (get_tag(is, "melf header") != "MELF")
    raise(ErrorKind::kUnsupportedFormat, "bad MELF magic in " + path);
  const uint32_t version = get<uint32_t>(is, "melf header");
  if (version != kMelFileVersion)
    raise(ErrorKind::kUnsupportedFormat,
          "unsupported MELF version " + std::to_string(version));
  const uint32_t n_frames = get<uint32_t>(is, "melf header");
  const uint32_t n_mels = get<uint32_t>(is, "melf header");
  const uint32_t sample_rate = get<uint32_t>(is, "melf header");
  const uint32_t hop = get<uint32_t>(is, "melf header");
  const uint32_t win = get<uint32_t>(is, "melf header");
  const uint8_t normalized = get<uint8_t>(is, "melf header");
  if (n_mels == 0) raise(ErrorKind::kCorruptFile, "MELF with zero channels");

  MelFile f;
  f.sample_rate = static_cast<int>(sample_rate);
  f.hop_length = static_cast<int>(hop);
  f.win_length = static_cast<int>(win);
  f.mel.normalized = normalized != 0;
  if (f.mel.normalized) {
    NormStats stats;
    stats.mean.resize(n_mels);
    stats.std.resize(n_mels);
    is.read(reinterpret_cast<char*>(stats.mean.data()), n_mels * 8);
    is.read(reinterpret_cast<char*>(stats.std.data()), n_mels * 8);
    if (!is) raise(ErrorKind::kCorruptFile, "truncated MELF stats");
    f.mel.stats = std::move(stats);
  }
  f.mel.values.resize(n_frames, n_mels);
  is.read(reinterpret_cast<char*>(f.mel.values.data()),
          static_cast<std::streamsize>(n_frames) * n_mels * 8);
  if (!is) raise(ErrorKind::kCorruptFile, "truncated MELF payload");
  char extra;
  if (is.read(&extra, 1))
    raise(ErrorKind::kCorruptFile, "trailing bytes after MELF payload");
  f.mel.validate();
  return f;
}

void write_mel(const std::string& path, const MelSpectrogram& mel,
               int sample_rate, int hop_length, int win_length) {
  mel.validate();
  std::ofstream os = open_out(path);
  put_tag(os, "MELF");
  put<uint32_t>(os, kMelFileVersion);
  put<uint32_t>(os, static_cast<uint32_t>(mel.frames()));
  put<uint32_t>(os, static_cast<uint32_t>(mel.n_mels()));
  put<uint32_t>(os, static_cast<uint32_t>(sample_rate));
  put<uint32_t>(os, static_cast<uint32_t>(hop_length));
  put<uint32_t>(os, static_cast<uint32_t>(win_length));
  put<uint8_t>(os, mel.normalized ? 1 : 0);
  if (mel.normalized) {
    os.write(reinterpret_cast<const char*>(mel.stats->mean.data()),
             mel.n_mels() * 8);
    os.write(reinterpret_cast<const char*>(mel.stats->std.data()),
             mel.n_mels() * 8);
  }
  os.write(reinterpret_cast<const char*>(mel.values.data()),
           static_cast<std::streamsize>(mel.values.size()) * 8);
  if (!os) raise(ErrorKind::kInvalidInput, "failed writing " + path);
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

void put_section(std::ostream& os, const std::string& name, const Mat& m) {
  put<uint32_t>(os, static_cast<uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<uint32_t>(os, static_cast<uint32_t>(m.rows()));
  put<uint32_t>(os, static_cast<uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(m.size()) * 8);
}

Mat scalar_mat(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainerState& state) {
  state.params.validate();
  std::ofstream os = open_out(path);
  put_tag(os, "MWCK");
  put<uint32_t>(os, 1);
  const auto tensors = state.params.tensors();
  for (auto& [name, mat] : tensors) put_section(os, "param/" + name, *mat);
  if (!state.adam.m.empty()) {
    if (state.adam.m.size() != tensors.size() ||
        state.adam.v.size() != tensors.size())
      raise(ErrorKind::kInvalidInput, "optimizer state tensor count mismatch");
    for (size_t i = 0; i < tensors.size(); ++i) {
      put_section(os, "adam_m/" + tensors[i].first, state.adam.m[i]);
      put_section(os, "adam_v/" + tensors[i].first, state.adam.v[i]);
    }
  }
  put_section(os, "norm/mean", Mat(state.stats.mean));
  put_section(os, "norm/std", Mat(state.stats.std));
  put_section(os, "meta/step", scalar_mat(static_cast<double>(state.step)));
  put_section(os, "meta/adam_t", scalar_mat(static_cast<double>(state.adam.t)));
  if (!os) raise(ErrorKind::kInvalidInput, "failed writing " + path);
}

TrainerState load_checkpoint(const std::string& path) {
  std::ifstream is = open_in(path);
  if (get_tag(is, "checkpoint header") != "MWCK")
    raise(ErrorKind::kUnsupportedFormat, "bad checkpoint magic in " + path);
  const uint32_t version = get<uint32_t>(is, "checkpoint header");
  if (version != 1)
    raise(ErrorKind::kUnsupportedFormat,
          "unsupported checkpoint version " + std::to_string(version));

  std::map<std::string, Mat> sections;
  while (true) {
    uint32_t name_len;
    is.read(reinterpret_cast<char*>(&name_len), 4);
    if (is.eof()) break;
    if (!is) raise(ErrorKind::kCorruptFile, "truncated checkpoint section");
    if (name_len == 0 || name_len > 4096)
      raise(ErrorKind::kCorruptFile, "implausible checkpoint section name");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rows = get<uint32_t>(is, "checkpoint section");
    const uint32_t cols = get<uint32_t>(is, "checkpoint section");
    Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size()) * 8);
    if (!is) raise(ErrorKind::kCorruptFile, "truncated checkpoint tensor");
    sections.emplace(std::move(name), std::move(m));
  }

  auto need = [&](const std::string& name) -> Mat& {
    auto it = sections.find(name);
    if (it == sections.end())
      raise(ErrorKind::kCorruptFile, "checkpoint misses section " + name);
    return it->second;
  };

  ModelConfig cfg;
  cfg.vocab_size = static_cast<int>(need("param/embedding").rows());
  cfg.embed_dim = static_cast<int>(need("param/embedding").cols());
  cfg.enc_dim = static_cast<int>(need("param/enc_wz").rows());
  cfg.dec_dim = static_cast<int>(need("param/dec_wz").rows());
  cfg.n_mels = static_cast<int>(need("param/out_w").rows());

  TrainerState state;
  state.params = ModelParams::init(cfg, 0);
  for (auto& [name, mat] : state.params.tensors()) {
    Mat& stored = need("param/" + name);
    if (stored.rows() != mat->rows() || stored.cols() != mat->cols())
      raise(ErrorKind::kCorruptFile, "checkpoint tensor shape mismatch: " + name);
    *mat = stored;
  }
  const auto tensors = state.params.tensors();
  if (sections.count("adam_m/embedding")) {
    state.adam.m.resize(tensors.size());
    state.adam.v.resize(tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
      state.adam.m[i] = need("adam_m/" + tensors[i].first);
      state.adam.v[i] = need("adam_v/" + tensors[i].first);
    }
  }
  state.stats.mean = need("norm/mean").col(0);
  state.stats.std = need("norm/std").col(0);
  state.stats.validate();
  state.step = static_cast<int64_t>(need("meta/step")(0, 0));
  state.adam.t = static_cast<int64_t>(need("meta/adam_t")(0, 0));
  state.params.validate();
  return state;
}

// ---------------------------------------------------------------------------
// run configuration

StftConfig RunConfig::stft_config() const {
  StftConfig cfg;
  cfg.win_length = win_length > 0 ? win_length : sample_rate / 20;
  cfg.hop_length = hop_length > 0 ? hop_length : sample_rate / 80;
  if (fft_size > 0) {
    cfg.fft_size = fft_size;
  } else {
    int fft = 1;
    while (fft < cfg.win_length) fft <<= 1;
    cfg.fft_size = fft;
  }
  cfg.window = window;
  return cfg;
}

CorpusSpec RunConfig::corpus_spec() const {
  CorpusSpec spec;
  spec.size = corpus_size;
  spec.vocab_size = vocab_size;
  spec.min_duration_s = min_duration_s;
  spec.max_duration_s = max_duration_s;
  spec.sample_rate = sample_rate;
  spec.seed = seed;
  return spec;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr_start = lr_start;
  cfg.lr_end = lr_end;
  cfg.lr_decay_start_step = lr_decay_start_step;
  cfg.beta1 = adam_beta1;
  cfg.beta2 = adam_beta2;
  cfg.adam_eps = adam_eps;
  cfg.l2_weight = l2_weight;
  cfg.lambda = lambda;
  cfg.gl_train_iterations = gl_train_iterations;
  cfg.time_loss = time_loss;
  cfg.seed = seed;
  return cfg;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.embed_dim = embed_dim;
  cfg.enc_dim = enc_dim;
  cfg.dec_dim = dec_dim;
  cfg.n_mels = n_mels;
  return cfg;
}

GriffinLimConfig RunConfig::gl_runtime() const {
  return GriffinLimConfig{gl_runtime_iterations, gl_init, gl_seed};
}

void RunConfig::validate() const {
  if (sample_rate <= 0)
    raise(ErrorKind::kInvalidConfig, "sample_rate must be > 0");
  stft_config().validate();
  corpus_spec().validate();
  train_config().validate();
  model_config().validate();
  gl_runtime().validate();
  if (gl_runtime_iterations < 0)
    raise(ErrorKind::kInvalidConfig, "gl_runtime_iterations must be >= 0");
  if (!(fmin >= 0.0)) raise(ErrorKind::kInvalidConfig, "fmin must be >= 0");
  if (!(fmax_hz() > fmin && fmax_hz() <= sample_rate / 2.0))
    raise(ErrorKind::kInvalidConfig, "need fmin < fmax <= sample_rate/2");
  if (frame_cap < 1) raise(ErrorKind::kInvalidConfig, "frame_cap must be >= 1");
}

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(ErrorKind::kInvalidConfig, "bad integer for " + key + ": " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(ErrorKind::kInvalidConfig, "bad number for " + key + ": " + v);
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(ErrorKind::kInvalidConfig, "bad unsigned for " + key + ": " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  raise(ErrorKind::kInvalidConfig, "bad boolean for " + key + ": " + v);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "sample_rate") cfg.sample_rate = to_int(key, value);
  else if (key == "win_length") cfg.win_length = to_int(key, value);
  else if (key == "hop_length") cfg.hop_length = to_int(key, value);
  else if (key == "fft_size") cfg.fft_size = to_int(key, value);
  else if (key == "window") cfg.window = window_kind_from_name(value);
  else if (key == "n_mels") cfg.n_mels = to_int(key, value);
  else if (key == "fmin") cfg.fmin = to_double(key, value);
  else if (key == "fmax") cfg.fmax = to_double(key, value);
  else if (key == "gl_train_iterations") cfg.gl_train_iterations = to_int(key, value);
  else if (key == "gl_runtime_iterations") cfg.gl_runtime_iterations = to_int(key, value);
  else if (key == "gl_init") {
    if (value == "zero") cfg.gl_init = PhaseInit::kZero;
    else if (value == "random") cfg.gl_init = PhaseInit::kSeededRandom;
    else raise(ErrorKind::kInvalidConfig, "gl_init must be zero or random");
  }
  else if (key == "gl_seed") cfg.gl_seed = to_u64(key, value);
  else if (key == "epochs") cfg.epochs = to_int(key, value);
  else if (key == "batch_size") cfg.batch_size = to_int(key, value);
  else if (key == "lr_start") cfg.lr_start = to_double(key, value);
  else if (key == "lr_end") cfg.lr_end = to_double(key, value);
  else if (key == "lr_decay_start_step") cfg.lr_decay_start_step = to_int(key, value);
  else if (key == "adam_beta1") cfg.adam_beta1 = to_double(key, value);
  else if (key == "adam_beta2") cfg.adam_beta2 = to_double(key, value);
  else if (key == "adam_eps") cfg.adam_eps = to_double(key, value);
  else if (key == "l2_weight") cfg.l2_weight = to_double(key, value);
  else if (key == "lambda") cfg.lambda = to_double(key, value);
  else if (key == "seed") cfg.seed = to_u64(key, value);
  else if (key == "time_loss") cfg.time_loss = to_bool(key, value);
  else if (key == "corpus_size") cfg.corpus_size = to_int(key, value);
  else if (key == "vocab_size") cfg.vocab_size = to_int(key, value);
  else if (key == "min_duration_s") cfg.min_duration_s = to_double(key, value);
  else if (key == "max_duration_s") cfg.max_duration_s = to_double(key, value);
  else if (key == "embed_dim") cfg.embed_dim = to_int(key, value);
  else if (key == "enc_dim") cfg.enc_dim = to_int(key, value);
  else if (key == "dec_dim") cfg.dec_dim = to_int(key, value);
  else if (key == "frame_cap") cfg.frame_cap = to_int(key, value);
  else raise(ErrorKind::kInvalidConfig, "unknown config key: " + key);
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) raise(ErrorKind::kInvalidInput, "cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorKind::kInvalidConfig,
            "expected key = value at line " + std::to_string(lineno));
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace melwave

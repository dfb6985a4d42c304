// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <memory>

#include "melwave/autodiff.hpp"
#include "melwave/diffsignal.hpp"
#include "melwave/io.hpp"
#include "melwave/loss.hpp"
#include "melwave/mel.hpp"
#include "melwave/model.hpp"
#include "melwave/phase.hpp"
#include "melwave/signal.hpp"

namespace py = pybind11;
using namespace melwave;

namespace {

using CMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic,
                           Eigen::Dynamic, Eigen::RowMajor>;

StftConfig make_cfg(int win, int hop, int fft, const std::string& window) {
  StftConfig cfg{win, hop, fft, window_kind_from_name(window)};
  cfg.validate();
  return cfg;
}

GriffinLimConfig make_gl(int iterations, const std::string& init,
                         uint64_t seed) {
  GriffinLimConfig cfg;
  cfg.iterations = iterations;
  if (init == "zero") cfg.init = PhaseInit::kZero;
  else if (init == "random") cfg.init = PhaseInit::kSeededRandom;
  else raise(ErrorKind::kInvalidConfig, "init must be zero or random");
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

CMat to_complex(const ComplexSpectrogram& X) {
  CMat out(X.frames(), X.bins());
  for (Eigen::Index t = 0; t < X.frames(); ++t)
    for (Eigen::Index k = 0; k < X.bins(); ++k)
      out(t, k) = {X.re(t, k), X.im(t, k)};
  return out;
}

ComplexSpectrogram from_complex(const CMat& values, const StftConfig& cfg) {
  ComplexSpectrogram X;
  X.config = cfg;
  X.re.resize(values.rows(), values.cols());
  X.im.resize(values.rows(), values.cols());
  for (Eigen::Index t = 0; t < values.rows(); ++t)
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      X.re(t, k) = values(t, k).real();
      X.im(t, k) = values(t, k).imag();
    }
  return X;
}

MelSpectrogram wrap_mel(const Mat& values, bool normalized,
                        const std::optional<NormStats>& stats) {
  MelSpectrogram m;
  m.values = values;
  m.normalized = normalized;
  if (normalized) {
    if (!stats)
      raise(ErrorKind::kInvalidInput, "normalized mel needs mean/std");
    m.stats = stats;
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mel analysis, Griffin-Lim reconstruction, SI-SDR losses, and a "
            "joint time-frequency trainer";

  py::register_exception<Error>(m, "MelwaveError");

  // --- signal ---------------------------------------------------------------

  m.def(
      "make_window",
      [](const std::string& kind, int n) {
        return Vec(make_window(window_kind_from_name(kind), n));
      },
      py::arg("kind"), py::arg("win_length"));

  m.def(
      "stft",
      [](const Vec& samples, int sample_rate, int win, int hop, int fft,
         const std::string& window) {
        Waveform w{samples, sample_rate};
        return to_complex(stft(w, make_cfg(win, hop, fft, window)));
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("win"),
      py::arg("hop"), py::arg("fft"), py::arg("window") = "hann");

  m.def(
      "istft",
      [](const CMat& spec, int sample_rate, int win, int hop, int fft,
         const std::string& window) {
        ComplexSpectrogram X = from_complex(spec, make_cfg(win, hop, fft, window));
        return Vec(istft(X, sample_rate).samples);
      },
      py::arg("spec"), py::arg("sample_rate"), py::arg("win"), py::arg("hop"),
      py::arg("fft"), py::arg("window") = "hann");

  // --- mel -------------------------------------------------------------------

  py::class_<MelFilterbank>(m, "MelFilterbank")
      .def(py::init<int, int, int, double, double>(), py::arg("n_mels"),
           py::arg("sample_rate"), py::arg("fft_size"), py::arg("fmin") = 0.0,
           py::arg("fmax") = 0.0)
      .def_property_readonly("weights",
                             [](const MelFilterbank& fb) { return fb.weights(); })
      .def_property_readonly("n_mels", &MelFilterbank::n_mels)
      .def_property_readonly("sample_rate", &MelFilterbank::sample_rate)
      .def_property_readonly("fft_size", &MelFilterbank::fft_size)
      .def(
          "mel_spectrum",
          [](const MelFilterbank& fb, const Mat& amplitude_values) {
            AmplitudeSpectrogram A;
            A.config = StftConfig{fb.fft_size(), fb.fft_size(), fb.fft_size(),
                                  WindowKind::kRectangular};
            A.values = amplitude_values;
            return Mat(mel_spectrum(A, fb).values);
          },
          py::arg("amplitude"))
      .def(
          "amplitude_estimate",
          [](const MelFilterbank& fb, const Mat& mel_values) {
            MelSpectrogram mel;
            mel.values = mel_values;
            StftConfig cfg{fb.fft_size(), fb.fft_size(), fb.fft_size(),
                           WindowKind::kRectangular};
            return Mat(epsilon_amplitude(mel, fb, cfg).values);
          },
          py::arg("mel"));

  // filterbank constructor treats fmax = 0 as sample_rate / 2
  m.def(
      "mel_filterbank",
      [](int n_mels, int sample_rate, int fft_size, double fmin, double fmax) {
        return MelFilterbank(n_mels, sample_rate, fft_size, fmin,
                             fmax > 0.0 ? fmax : sample_rate / 2.0);
      },
      py::arg("n_mels"), py::arg("sample_rate"), py::arg("fft_size"),
      py::arg("fmin") = 0.0, py::arg("fmax") = 0.0);

  m.def(
      "normalize",
      [](const Mat& mel, const Vec& mean, const Vec& std) {
        return Mat(normalize(wrap_mel(mel, false, std::nullopt),
                             NormStats{mean, std})
                       .values);
      },
      py::arg("mel"), py::arg("mean"), py::arg("std"));
  m.def(
      "denormalize",
      [](const Mat& mel, const Vec& mean, const Vec& std) {
        NormStats stats{mean, std};
        return Mat(denormalize(wrap_mel(mel, true, stats), stats).values);
      },
      py::arg("mel"), py::arg("mean"), py::arg("std"));

  // --- phase reconstruction ---------------------------------------------------

  m.def(
      "griffin_lim",
      [](const Mat& amplitude_values, int win, int hop, int fft,
         const std::string& window, int iterations, const std::string& init,
         uint64_t seed) {
        AmplitudeSpectrogram A;
        A.config = make_cfg(win, hop, fft, window);
        A.values = amplitude_values;
        return to_complex(griffin_lim(A, make_gl(iterations, init, seed)));
      },
      py::arg("amplitude"), py::arg("win"), py::arg("hop"), py::arg("fft"),
      py::arg("window") = "hann", py::arg("iterations") = 64,
      py::arg("init") = "zero", py::arg("seed") = 0);

  m.def(
      "reconstruct",
      [](const Mat& mel, const MelFilterbank& fb, int win, int hop,
         const std::string& window, int iterations, const std::string& init,
         uint64_t seed, bool normalized, std::optional<Vec> mean,
         std::optional<Vec> std) {
        std::optional<NormStats> stats;
        if (normalized) stats = NormStats{*mean, *std};
        MelSpectrogram ms = wrap_mel(mel, normalized, stats);
        StftConfig cfg = make_cfg(win, hop, fb.fft_size(), window);
        return Vec(reconstruct(ms, fb, cfg, make_gl(iterations, init, seed))
                       .samples);
      },
      py::arg("mel"), py::arg("filterbank"), py::arg("win"), py::arg("hop"),
      py::arg("window") = "hann", py::arg("iterations") = 64,
      py::arg("init") = "zero", py::arg("seed") = 0,
      py::arg("normalized") = false, py::arg("mean") = std::nullopt,
      py::arg("std") = std::nullopt);

  // --- losses -----------------------------------------------------------------

  m.def(
      "loss_f",
      [](const Mat& pred, const Mat& target) {
        return loss_f(wrap_mel(pred, false, std::nullopt),
                      wrap_mel(target, false, std::nullopt));
      },
      py::arg("pred"), py::arg("target"));
  m.def(
      "si_sdr",
      [](const Vec& est, const Vec& ref) {
        return si_sdr(Waveform{est, 16000}, Waveform{ref, 16000});
      },
      py::arg("est"), py::arg("ref"));
  m.def(
      "loss_t",
      [](const Vec& est, const Vec& ref) {
        return loss_t(Waveform{est, 16000}, Waveform{ref, 16000});
      },
      py::arg("est"), py::arg("ref"));
  m.def(
      "joint_loss",
      [](const Mat& pred, const Mat& target, const Vec& est, const Vec& ref,
         double lam) {
        LossReport r =
            joint_loss(wrap_mel(pred, false, std::nullopt),
                       wrap_mel(target, false, std::nullopt),
                       Waveform{est, 16000}, Waveform{ref, 16000}, lam);
        py::dict d;
        d["loss_f"] = r.loss_f;
        d["loss_t"] = r.loss_t;
        d["lambda"] = r.lambda;
        d["total"] = r.total;
        return d;
      },
      py::arg("pred"), py::arg("target"), py::arg("est"), py::arg("ref"),
      py::arg("lam") = 1e-3);

  // --- the differentiable reconstruction loss ---------------------------------

  m.def(
      "time_loss_grad",
      [](const Mat& mel, const MelFilterbank& fb, int win, int hop,
         const std::string& window, int iterations, const Vec& ref) {
        ad::StftPlan plan =
            ad::make_stft_plan(make_cfg(win, hop, fb.fft_size(), window));
        GriffinLimConfig gl{iterations, PhaseInit::kZero, 0};
        ad::Tape tape;
        ad::Value x = tape.input(mel);
        ad::Value loss = ad::taped_time_loss_from_mel(
            x, fb, plan, gl, Mat(ref.transpose()));
        tape.backward(loss);
        return py::make_tuple(loss.val()(0, 0), Mat(tape.adjoint(x)));
      },
      py::arg("mel"), py::arg("filterbank"), py::arg("win"), py::arg("hop"),
      py::arg("window") = "hann", py::arg("iterations") = 1, py::arg("ref"),
      "Loss_T of the reconstruction of `mel` against `ref`, and its gradient "
      "with respect to every mel element (reverse mode through the unrolled "
      "Griffin-Lim and ISTFT).");

  // --- corpus / training --------------------------------------------------------

  py::class_<SyntheticCorpus>(m, "Corpus")
      .def("__len__",
           [](const SyntheticCorpus& c) { return c.utterances.size(); })
      .def("tokens",
           [](const SyntheticCorpus& c, int i) {
             return c.utterances.at(i).tokens;
           })
      .def("audio",
           [](const SyntheticCorpus& c, int i) {
             return Vec(c.utterances.at(i).audio.samples);
           })
      .def_property_readonly("sample_rate", [](const SyntheticCorpus& c) {
        return c.spec.sample_rate;
      });

  m.def(
      "make_corpus",
      [](int size, int vocab, double min_s, double max_s, int sample_rate,
         uint64_t seed) {
        CorpusSpec spec;
        spec.size = size;
        spec.vocab_size = vocab;
        spec.min_duration_s = min_s;
        spec.max_duration_s = max_s;
        spec.sample_rate = sample_rate;
        spec.seed = seed;
        return make_corpus(spec);
      },
      py::arg("size") = 64, py::arg("vocab_size") = 16,
      py::arg("min_duration_s") = 1.0, py::arg("max_duration_s") = 3.0,
      py::arg("sample_rate") = 16000, py::arg("seed") = 0);

  py::class_<TrainerState>(m, "TrainerState")
      .def_property_readonly("step",
                             [](const TrainerState& s) { return s.step; })
      .def_property_readonly(
          "norm_mean", [](const TrainerState& s) { return Vec(s.stats.mean); })
      .def_property_readonly(
          "norm_std", [](const TrainerState& s) { return Vec(s.stats.std); })
      .def("save", [](const TrainerState& s,
                      const std::string& path) { save_checkpoint(path, s); })
      .def_static("load", [](const std::string& path) {
        return load_checkpoint(path);
      });

  m.def(
      "train",
      [](const SyntheticCorpus& corpus, int epochs, int batch_size,
         double lambda, int gl_train_iterations, bool time_loss, uint64_t seed,
         int win, int hop, int fft, int n_mels, int embed_dim, int enc_dim,
         int dec_dim, double fmin, double fmax,
         const TrainerState* resume) {
        TrainConfig tcfg;
        tcfg.epochs = epochs;
        tcfg.batch_size = batch_size;
        tcfg.lambda = lambda;
        tcfg.gl_train_iterations = gl_train_iterations;
        tcfg.time_loss = time_loss;
        tcfg.seed = seed;
        ModelConfig mcfg;
        mcfg.vocab_size = corpus.spec.vocab_size;
        mcfg.embed_dim = embed_dim;
        mcfg.enc_dim = enc_dim;
        mcfg.dec_dim = dec_dim;
        mcfg.n_mels = n_mels;
        StftConfig cfg = make_cfg(win, hop, fft, "hann");
        TrainResult r =
            train(corpus, tcfg, mcfg, cfg, fmin,
                  fmax > 0.0 ? fmax : corpus.spec.sample_rate / 2.0, resume);
        py::list log;
        for (const StepLog& s : r.log) {
          py::dict d;
          d["step"] = s.step;
          d["loss_f"] = s.loss_f;
          d["loss_t"] = s.loss_t;
          d["total"] = s.total;
          d["lr"] = s.lr;
          log.append(d);
        }
        return py::make_tuple(r.state, log);
      },
      py::arg("corpus"), py::arg("epochs"), py::arg("batch_size") = 32,
      py::arg("lam") = 1e-3, py::arg("gl_train_iterations") = 1,
      py::arg("time_loss") = true, py::arg("seed") = 1, py::arg("win"),
      py::arg("hop"), py::arg("fft"), py::arg("n_mels") = 80,
      py::arg("embed_dim") = 16, py::arg("enc_dim") = 32,
      py::arg("dec_dim") = 32, py::arg("fmin") = 0.0, py::arg("fmax") = 0.0,
      py::arg("resume") = nullptr);

  m.def(
      "synthesize",
      [](const TrainerState& state, const std::vector<int>& tokens, int win,
         int hop, int fft, int sample_rate, int iterations,
         const std::string& init, uint64_t seed, int frame_cap, double fmin,
         double fmax) {
        StftConfig cfg = make_cfg(win, hop, fft, "hann");
        Waveform w = synthesize(
            state, cfg, fmin, fmax > 0.0 ? fmax : sample_rate / 2.0,
            sample_rate, tokens, make_gl(iterations, init, seed), frame_cap);
        return Vec(w.samples);
      },
      py::arg("state"), py::arg("tokens"), py::arg("win"), py::arg("hop"),
      py::arg("fft"), py::arg("sample_rate"), py::arg("iterations") = 64,
      py::arg("init") = "zero", py::arg("seed") = 0,
      py::arg("frame_cap") = 400, py::arg("fmin") = 0.0, py::arg("fmax") = 0.0);

  // --- file formats -------------------------------------------------------------

  m.def(
      "read_wav",
      [](const std::string& path) {
        Waveform w = read_wav(path);
        return py::make_tuple(Vec(w.samples), w.sample_rate);
      },
      py::arg("path"));
  m.def(
      "write_wav",
      [](const std::string& path, const Vec& samples, int sample_rate,
         int bits) { write_wav(path, Waveform{samples, sample_rate}, bits); },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"),
      py::arg("bits") = 16);
  m.def(
      "read_mel",
      [](const std::string& path) {
        MelFile f = read_mel(path);
        py::dict d;
        d["mel"] = Mat(f.mel.values);
        d["normalized"] = f.mel.normalized;
        if (f.mel.normalized) {
          d["mean"] = Vec(f.mel.stats->mean);
          d["std"] = Vec(f.mel.stats->std);
        }
        d["sample_rate"] = f.sample_rate;
        d["hop"] = f.hop_length;
        d["win"] = f.win_length;
        return d;
      },
      py::arg("path"));
  m.def(
      "write_mel",
      [](const std::string& path, const Mat& mel, int sample_rate, int hop,
         int win, bool normalized, std::optional<Vec> mean,
         std::optional<Vec> std) {
        std::optional<NormStats> stats;
        if (normalized) stats = NormStats{*mean, *std};
        write_mel(path, wrap_mel(mel, normalized, stats), sample_rate, hop,
                  win);
      },
      py::arg("path"), py::arg("mel"), py::arg("sample_rate"), py::arg("hop"),
      py::arg("win"), py::arg("normalized") = false,
      py::arg("mean") = std::nullopt, py::arg("std") = std::nullopt);
}

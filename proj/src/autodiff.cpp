// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melwave/autodiff.hpp"

#include <cmath>
#include <numbers>

namespace melwave::ad {

namespace {

Tape* resolve_tape(const Value& a, const Value& b) {
  Tape* t = a.tape();
  if (b.tape()) {
    if (t && t != b.tape())
      raise(ErrorKind::kInvalidInput, "operands live on different tapes");
    t = b.tape();
  }
  return t;
}

void require_same_shape(const Value& a, const Value& b, const char* op) {
  if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols())
    raise(ErrorKind::kInvalidInput, std::string(op) + ": shape mismatch");
}

uint64_t elem_key(int node, Eigen::Index i) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(node)) << 32) ^
         static_cast<uint64_t>(i);
}

}  // namespace

const Mat& Value::val() const {
  if (tape_) return tape_->value_of(node_);
  if (!cval_) raise(ErrorKind::kInvalidInput, "reading an empty value");
  return *cval_;
}

Value Tape::emit(Mat value, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), std::move(backward)});
  Value v;
  v.tape_ = this;
  v.node_ = static_cast<int>(nodes_.size()) - 1;
  return v;
}

void Tape::backward(const Value& loss) {
  if (loss.is_const() || loss.tape_ != this)
    raise(ErrorKind::kInvalidInput, "backward needs a node of this tape");
  const Mat& lv = loss.val();
  if (lv.rows() != 1 || lv.cols() != 1)
    raise(ErrorKind::kInvalidInput, "backward needs a scalar loss");
  adjoints_.resize(nodes_.size());
  has_adj_.assign(nodes_.size(), 0);
  adjoints_[loss.node_] = Mat::Ones(1, 1);
  has_adj_[loss.node_] = 1;
  for (int i = loss.node_; i >= 0; --i) {
    if (has_adj_[i] && nodes_[i].backward)
      nodes_[i].backward(*this, adjoints_[i], nodes_[i].value);
  }
}

Mat Tape::adjoint(const Value& v) const {
  if (v.is_const())
    raise(ErrorKind::kInvalidInput, "constants have no adjoint");
  if (reached(v)) return adjoints_[v.node_];
  return Mat::Zero(v.val().rows(), v.val().cols());
}

void Tape::reset() {
  nodes_.clear();
  adjoints_.clear();
  has_adj_.clear();
  smooth_hash_ = 1469598103934665603ull;
}

// ---------------------------------------------------------------------------
// primitives

Value add(const Value& a, const Value& b) {
  require_same_shape(a, b, "add");
  Tape* t = resolve_tape(a, b);
  Mat out = a.val() + b.val();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, b](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g);
    tp.accum(b, g);
  });
}

Value sub(const Value& a, const Value& b) {
  require_same_shape(a, b, "sub");
  Tape* t = resolve_tape(a, b);
  Mat out = a.val() - b.val();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, b](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g);
    tp.accum(b, -g);
  });
}

Value mul(const Value& a, const Value& b) {
  require_same_shape(a, b, "mul");
  Tape* t = resolve_tape(a, b);
  Mat out = a.val().cwiseProduct(b.val());
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, b](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g.cwiseProduct(b.val()));
    tp.accum(b, g.cwiseProduct(a.val()));
  });
}

Value div(const Value& a, const Value& b) {
  require_same_shape(a, b, "div");
  Tape* t = resolve_tape(a, b);
  Mat out = a.val().cwiseQuotient(b.val());
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, b](Tape& tp, const Mat& g, const Mat& o) {
    tp.accum(a, g.cwiseQuotient(b.val()));
    tp.accum(b, (-(g.cwiseProduct(o))).cwiseQuotient(b.val()));
  });
}

Value scale(const Value& a, double c) {
  Tape* t = a.tape();
  Mat out = a.val() * c;
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, c](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g * c);
  });
}

Value add_scalar(const Value& a, double c) {
  Tape* t = a.tape();
  Mat out = a.val().array() + c;
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g);
  });
}

Value smul(const Value& s, const Value& m) {
  if (s.val().size() != 1)
    raise(ErrorKind::kInvalidInput, "smul scale must be 1x1");
  Tape* t = resolve_tape(s, m);
  Mat out = s.val()(0, 0) * m.val();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [s, m](Tape& tp, const Mat& g, const Mat&) {
    Mat gs(1, 1);
    gs(0, 0) = g.cwiseProduct(m.val()).sum();
    tp.accum(s, gs);
    tp.accum(m, g * s.val()(0, 0));
  });
}

Value matmul(const Value& a, const Value& b, bool trans_a, bool trans_b) {
  const Mat& av = a.val();
  const Mat& bv = b.val();
  const Eigen::Index ak = trans_a ? av.rows() : av.cols();
  const Eigen::Index bk = trans_b ? bv.cols() : bv.rows();
  if (ak != bk) raise(ErrorKind::kInvalidInput, "matmul: inner dim mismatch");
  Tape* t = resolve_tape(a, b);
  Mat out;
  if (!trans_a && !trans_b) out.noalias() = av * bv;
  else if (trans_a && !trans_b) out.noalias() = av.transpose() * bv;
  else if (!trans_a && trans_b) out.noalias() = av * bv.transpose();
  else out.noalias() = av.transpose() * bv.transpose();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, b, trans_a, trans_b](Tape& tp, const Mat& g, const Mat&) {
    const Mat& A = a.val();
    const Mat& B = b.val();
    if (!trans_a && !trans_b) {
      tp.accum(a, g * B.transpose());
      tp.accum(b, A.transpose() * g);
    } else if (trans_a && !trans_b) {
      tp.accum(a, B * g.transpose());
      tp.accum(b, A * g);
    } else if (!trans_a && trans_b) {
      tp.accum(a, g * B);
      tp.accum(b, g.transpose() * A);
    } else {
      tp.accum(a, B.transpose() * g.transpose());
      tp.accum(b, g.transpose() * A.transpose());
    }
  });
}

Value transpose(const Value& a) {
  Tape* t = a.tape();
  Mat out = a.val().transpose();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g.transpose());
  });
}

Value take_cols(const Value& a, int n) {
  if (n < 0 || n > a.val().cols())
    raise(ErrorKind::kInvalidInput, "take_cols out of range");
  Tape* t = a.tape();
  Mat out = a.val().leftCols(n);
  if (!t) return Value::constant(std::move(out));
  const Eigen::Index full = a.val().cols();
  return t->emit(std::move(out), [a, n, full](Tape& tp, const Mat& g, const Mat&) {
    Mat ga = Mat::Zero(g.rows(), full);
    ga.leftCols(n) = g;
    tp.accum(a, ga);
  });
}

Value pad_cols(const Value& a, int n) {
  if (n < a.val().cols())
    raise(ErrorKind::kInvalidInput, "pad_cols narrower than input");
  Tape* t = a.tape();
  Mat out = Mat::Zero(a.val().rows(), n);
  out.leftCols(a.val().cols()) = a.val();
  if (!t) return Value::constant(std::move(out));
  const Eigen::Index w = a.val().cols();
  return t->emit(std::move(out), [a, w](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g.leftCols(w));
  });
}

Value take_rows(const Value& a, const std::vector<int>& rows) {
  const Mat& av = a.val();
  for (int r : rows)
    if (r < 0 || r >= av.rows())
      raise(ErrorKind::kInvalidInput, "take_rows index out of range");
  Tape* t = a.tape();
  Mat out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = av.row(rows[i]);
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, rows](Tape& tp, const Mat& g, const Mat&) {
    Mat ga = Mat::Zero(a.val().rows(), a.val().cols());
    for (size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(i);
    tp.accum(a, ga);
  });
}

Value vstack(const Value& a, const Value& b) {
  if (a.val().cols() != b.val().cols())
    raise(ErrorKind::kInvalidInput, "vstack: column mismatch");
  Tape* t = resolve_tape(a, b);
  Mat out(a.val().rows() + b.val().rows(), a.val().cols());
  out.topRows(a.val().rows()) = a.val();
  out.bottomRows(b.val().rows()) = b.val();
  if (!t) return Value::constant(std::move(out));
  const Eigen::Index na = a.val().rows();
  return t->emit(std::move(out), [a, b, na](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g.topRows(na));
    tp.accum(b, g.bottomRows(g.rows() - na));
  });
}

Value stack_cols(const std::vector<Value>& cols) {
  if (cols.empty()) raise(ErrorKind::kInvalidInput, "stack_cols of nothing");
  const Eigen::Index rows = cols.front().val().rows();
  Tape* t = nullptr;
  for (const Value& c : cols) {
    if (c.val().cols() != 1 || c.val().rows() != rows)
      raise(ErrorKind::kInvalidInput, "stack_cols expects equal column vectors");
    if (c.tape()) {
      if (t && t != c.tape())
        raise(ErrorKind::kInvalidInput, "operands live on different tapes");
      t = c.tape();
    }
  }
  Mat out(rows, static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i) out.col(i) = cols[i].val();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [cols](Tape& tp, const Mat& g, const Mat&) {
    for (size_t i = 0; i < cols.size(); ++i) tp.accum(cols[i], g.col(i));
  });
}

Value row_mul_vec(const Value& a, const Vec& v) {
  if (a.val().cols() != v.size())
    raise(ErrorKind::kInvalidInput, "row_mul_vec length mismatch");
  Tape* t = a.tape();
  Mat out = a.val().array().rowwise() * v.transpose().array();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, v](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, (g.array().rowwise() * v.transpose().array()).matrix());
  });
}

Value row_add_vec(const Value& a, const Vec& v) {
  if (a.val().cols() != v.size())
    raise(ErrorKind::kInvalidInput, "row_add_vec length mismatch");
  Tape* t = a.tape();
  Mat out = a.val().rowwise() + v.transpose();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g);
  });
}

Value cmul(const Value& a, const Mat& m) {
  if (a.val().rows() != m.rows() || a.val().cols() != m.cols())
    raise(ErrorKind::kInvalidInput, "cmul shape mismatch");
  Tape* t = a.tape();
  Mat out = a.val().cwiseProduct(m);
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, m](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g.cwiseProduct(m));
  });
}

Value sum(const Value& a) {
  Tape* t = a.tape();
  Mat out(1, 1);
  out(0, 0) = a.val().sum();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, Mat::Constant(a.val().rows(), a.val().cols(), g(0, 0)));
  });
}

Value mean(const Value& a) {
  if (a.val().size() == 0) raise(ErrorKind::kInvalidInput, "mean of empty");
  Tape* t = a.tape();
  Mat out(1, 1);
  out(0, 0) = a.val().sum() / static_cast<double>(a.val().size());
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat&) {
    const double s = g(0, 0) / static_cast<double>(a.val().size());
    tp.accum(a, Mat::Constant(a.val().rows(), a.val().cols(), s));
  });
}

Value dot(const Value& a, const Value& b) {
  require_same_shape(a, b, "dot");
  Tape* t = resolve_tape(a, b);
  Mat out(1, 1);
  out(0, 0) = a.val().cwiseProduct(b.val()).sum();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, b](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, g(0, 0) * b.val());
    tp.accum(b, g(0, 0) * a.val());
  });
}

Value norm_sq(const Value& a) {
  Tape* t = a.tape();
  Mat out(1, 1);
  out(0, 0) = a.val().squaredNorm();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(a, (2.0 * g(0, 0)) * a.val());
  });
}

Value clamp(const Value& a, double lo, double hi) {
  if (!(lo < hi)) raise(ErrorKind::kInvalidConfig, "clamp needs lo < hi");
  Tape* t = a.tape();
  const Mat& av = a.val();
  Mat out(av.rows(), av.cols());
  const int id = t ? t->next_node_id() : -1;
  const double* x = av.data();
  double* o = out.data();
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    if (x[i] <= lo) {
      o[i] = lo;
      if (t) t->fold_smooth(elem_key(id, i) ^ 0x1ull);
    } else if (x[i] >= hi) {
      o[i] = hi;
      if (t) t->fold_smooth(elem_key(id, i) ^ 0x2ull);
    } else {
      o[i] = x[i];
    }
  }
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a, lo, hi](Tape& tp, const Mat& g, const Mat&) {
    const Mat& av = a.val();
    Mat ga(g.rows(), g.cols());
    const double* x = av.data();
    const double* gg = g.data();
    double* d = ga.data();
    for (Eigen::Index i = 0; i < av.size(); ++i)
      d[i] = (x[i] > lo && x[i] < hi) ? gg[i] : 0.0;
    tp.accum(a, ga);
  });
}

Value log10(const Value& a) {
  Tape* t = a.tape();
  const Mat& av = a.val();
  Mat out(av.rows(), av.cols());
  const int id = t ? t->next_node_id() : -1;
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    out.data()[i] = std::log10(av.data()[i]);
    if (t && !(av.data()[i] > 0.0)) t->fold_smooth(elem_key(id, i) ^ 0x3ull);
  }
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat&) {
    const Mat& av = a.val();
    Mat ga(g.rows(), g.cols());
    constexpr double kInvLn10 = 0.43429448190325176;
    for (Eigen::Index i = 0; i < av.size(); ++i) {
      const double x = av.data()[i];
      ga.data()[i] = x > 0.0 ? g.data()[i] * kInvLn10 / x : 0.0;
    }
    tp.accum(a, ga);
  });
}

Value tanh(const Value& a) {
  Tape* t = a.tape();
  Mat out = a.val().array().tanh();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat& o) {
    tp.accum(a, g.cwiseProduct((1.0 - o.array().square()).matrix()));
  });
}

Value sigmoid(const Value& a) {
  Tape* t = a.tape();
  const Mat& av = a.val();
  Mat out(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    const double x = av.data()[i];
    out.data()[i] =
        x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                 : std::exp(x) / (1.0 + std::exp(x));
  }
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat& o) {
    tp.accum(a, g.cwiseProduct(
                    o.cwiseProduct((1.0 - o.array()).matrix())));
  });
}

Value softmax_vec(const Value& a) {
  const Mat& av = a.val();
  if (av.cols() != 1)
    raise(ErrorKind::kInvalidInput, "softmax_vec expects a column vector");
  Tape* t = a.tape();
  const double mx = av.maxCoeff();
  Mat e = (av.array() - mx).exp();
  Mat out = e / e.sum();
  if (!t) return Value::constant(std::move(out));
  return t->emit(std::move(out), [a](Tape& tp, const Mat& g, const Mat& o) {
    const double gs = g.cwiseProduct(o).sum();
    tp.accum(a, o.cwiseProduct((g.array() - gs).matrix()));
  });
}

SpecVar complex_from_polar(const Value& amp, const Value& phase) {
  require_same_shape(amp, phase, "complex_from_polar");
  Tape* t = resolve_tape(amp, phase);
  Mat c = phase.val().array().cos();
  Mat s = phase.val().array().sin();
  Mat re = amp.val().cwiseProduct(c);
  Mat im = amp.val().cwiseProduct(s);
  if (!t) return {Value::constant(std::move(re)), Value::constant(std::move(im))};
  Value vre = t->emit(std::move(re), [amp, phase, c, s](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(amp, g.cwiseProduct(c));
    tp.accum(phase, -g.cwiseProduct(amp.val()).cwiseProduct(s));
  });
  Value vim = t->emit(std::move(im), [amp, phase, c, s](Tape& tp, const Mat& g, const Mat&) {
    tp.accum(amp, g.cwiseProduct(s));
    tp.accum(phase, g.cwiseProduct(amp.val()).cwiseProduct(c));
  });
  return {vre, vim};
}

Value modulus(const SpecVar& z) {
  require_same_shape(z.re, z.im, "modulus");
  Tape* t = resolve_tape(z.re, z.im);
  const Mat& re = z.re.val();
  const Mat& im = z.im.val();
  Mat out(re.rows(), re.cols());
  const int id = t ? t->next_node_id() : -1;
  for (Eigen::Index i = 0; i < re.size(); ++i) {
    out.data()[i] = std::sqrt(re.data()[i] * re.data()[i] +
                              im.data()[i] * im.data()[i]);
    if (t && out.data()[i] == 0.0) t->fold_smooth(elem_key(id, i) ^ 0x4ull);
  }
  if (!t) return Value::constant(std::move(out));
  Value zre = z.re, zim = z.im;
  return t->emit(std::move(out), [zre, zim](Tape& tp, const Mat& g, const Mat& o) {
    const Mat& re = zre.val();
    const Mat& im = zim.val();
    Mat gr(re.rows(), re.cols()), gi(re.rows(), re.cols());
    for (Eigen::Index i = 0; i < re.size(); ++i) {
      const double m = o.data()[i];
      const double s = m > 0.0 ? g.data()[i] / m : 0.0;
      gr.data()[i] = s * re.data()[i];
      gi.data()[i] = s * im.data()[i];
    }
    tp.accum(zre, gr);
    tp.accum(zim, gi);
  });
}

SpecVar unit_phase(const SpecVar& z) {
  require_same_shape(z.re, z.im, "unit_phase");
  Tape* t = resolve_tape(z.re, z.im);
  const Mat& re = z.re.val();
  const Mat& im = z.im.val();
  Mat ure(re.rows(), re.cols()), uim(re.rows(), re.cols());
  const int id = t ? t->next_node_id() : -1;
  for (Eigen::Index i = 0; i < re.size(); ++i) {
    const double m =
        std::sqrt(re.data()[i] * re.data()[i] + im.data()[i] * im.data()[i]);
    if (m > 0.0) {
      ure.data()[i] = re.data()[i] / m;
      uim.data()[i] = im.data()[i] / m;
    } else {
      ure.data()[i] = 1.0;
      uim.data()[i] = 0.0;
      if (t) t->fold_smooth(elem_key(id, i) ^ 0x5ull);
    }
  }
  if (!t)
    return {Value::constant(std::move(ure)), Value::constant(std::move(uim))};
  Value zre = z.re, zim = z.im;
  // d(re/m)/dre = im^2/m^3, d(re/m)/dim = -re*im/m^3,
  // d(im/m)/dre = -re*im/m^3, d(im/m)/dim = re^2/m^3; zero at m = 0.
  auto bwd_re = [zre, zim](Tape& tp, const Mat& g, const Mat&) {
    const Mat& re = zre.val();
    const Mat& im = zim.val();
    Mat gr(re.rows(), re.cols()), gi(re.rows(), re.cols());
    for (Eigen::Index i = 0; i < re.size(); ++i) {
      const double r = re.data()[i], q = im.data()[i];
      const double m2 = r * r + q * q;
      if (m2 > 0.0) {
        const double m3 = m2 * std::sqrt(m2);
        gr.data()[i] = g.data()[i] * (q * q) / m3;
        gi.data()[i] = -g.data()[i] * (r * q) / m3;
      } else {
        gr.data()[i] = 0.0;
        gi.data()[i] = 0.0;
      }
    }
    tp.accum(zre, gr);
    tp.accum(zim, gi);
  };
  auto bwd_im = [zre, zim](Tape& tp, const Mat& g, const Mat&) {
    const Mat& re = zre.val();
    const Mat& im = zim.val();
    Mat gr(re.rows(), re.cols()), gi(re.rows(), re.cols());
    for (Eigen::Index i = 0; i < re.size(); ++i) {
      const double r = re.data()[i], q = im.data()[i];
      const double m2 = r * r + q * q;
      if (m2 > 0.0) {
        const double m3 = m2 * std::sqrt(m2);
        gr.data()[i] = -g.data()[i] * (r * q) / m3;
        gi.data()[i] = g.data()[i] * (r * r) / m3;
      } else {
        gr.data()[i] = 0.0;
        gi.data()[i] = 0.0;
      }
    }
    tp.accum(zre, gr);
    tp.accum(zim, gi);
  };
  Value vre = t->emit(std::move(ure), bwd_re);
  Value vim = t->emit(std::move(uim), bwd_im);
  return {vre, vim};
}

// ---------------------------------------------------------------------------
// gradient checking

GradCheckReport grad_check(const ScalarFn& fn, const Mat& x0,
                           const GradCheckOptions& opts) {
  if (!(opts.fd_step > 0.0))
    raise(ErrorKind::kInvalidConfig, "fd_step must be > 0");
  if (!x0.allFinite())
    raise(ErrorKind::kInvalidInput, "grad_check input must be finite");

  Tape tape;
  Value x = tape.input(x0);
  Value loss = fn(tape, x);
  if (loss.val().size() != 1)
    raise(ErrorKind::kInvalidInput, "grad_check needs a scalar function");
  const uint64_t base_hash = tape.smooth_hash();
  tape.backward(loss);
  const Mat analytic = tape.adjoint(x);

  auto eval = [&](const Mat& xin, uint64_t* hash) {
    tape.reset();
    Value v = tape.input(xin);
    Value l = fn(tape, v);
    if (hash) *hash = tape.smooth_hash();
    return l.val()(0, 0);
  };

  GradCheckReport report;
  report.max_rel_error = 0.0;
  double grad_scale = 0.0;
  for (Eigen::Index i = 0; i < x0.size(); ++i)
    if (std::abs(x0.data()[i]) > opts.value_floor)
      grad_scale = std::max(grad_scale, std::abs(analytic.data()[i]));
  const double denom_floor =
      std::max(opts.abs_floor, opts.scale_floor_rel * grad_scale);
  Mat xp = x0;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    if (std::abs(x0.data()[i]) <= opts.value_floor) {
      ++report.n_excluded_floor;
      continue;
    }
    const double orig = xp.data()[i];
    uint64_t hp = 0, hm = 0;
    xp.data()[i] = orig + opts.fd_step;
    const double fp = eval(xp, &hp);
    xp.data()[i] = orig - opts.fd_step;
    const double fm = eval(xp, &hm);
    xp.data()[i] = orig;
    if (hp != base_hash || hm != base_hash) {
      ++report.n_excluded_nonsmooth;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * opts.fd_step);
    const double a = analytic.data()[i];
    const double denom = std::max(std::abs(a), std::abs(numeric));
    const double rel =
        denom <= opts.abs_floor
            ? 0.0
            : std::abs(a - numeric) / std::max(denom, denom_floor);
    ++report.n_checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = static_cast<int>(i);
    }
    if (rel > opts.tol &&
        static_cast<int>(report.failures.size()) < opts.max_failures) {
      report.failures.push_back(
          {static_cast<int>(i), a, numeric, rel});
    }
  }
  report.passed = report.n_checked > 0 && report.max_rel_error <= opts.tol;
  return report;
}

}  // namespace melwave::ad

// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "melwave/error.hpp"
#include "melwave/types.hpp"

namespace melwave::ad {

class Tape;

// Handle to a tape node or to a constant. Constants carry data directly and
// no node id; they never receive adjoints.
class Value {
 public:
  Value() = default;

  static Value constant(Mat m) {
    Value v;
    v.cval_ = std::make_shared<const Mat>(std::move(m));
    return v;
  }
  static Value constant(std::shared_ptr<const Mat> m) {
    Value v;
    v.cval_ = std::move(m);
    return v;
  }
  static Value scalar_const(double x) {
    Mat m(1, 1);
    m(0, 0) = x;
    return constant(std::move(m));
  }

  bool is_const() const { return tape_ == nullptr; }
  bool is_empty() const { return tape_ == nullptr && !cval_; }
  const Mat& val() const;
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

 private:
  friend class Tape;
  Tape* tape_ = nullptr;
  int node_ = -1;
  std::shared_ptr<const Mat> cval_;
};

// Append-only record of primitive operations. Node order is a topological
// order by construction; backward walks it once in reverse with ordered,
// deterministic accumulation.
class Tape {
 public:
  // adjoint of this node, this node's forward value
  using BackwardFn = std::function<void(Tape&, const Mat&, const Mat&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable leaf (model parameter / checked input).
  Value input(Mat v) { return emit(std::move(v), nullptr); }

  Value emit(Mat value, BackwardFn backward);

  const Mat& value_of(int node) const { return nodes_[node].value; }
  size_t size() const { return nodes_.size(); }

  // Seeds the scalar loss with adjoint 1 and accumulates adjoints for every
  // node it reaches; everything else keeps a zero adjoint.
  void backward(const Value& loss);

  // Zero matrix of the node's shape when the node was not reached.
  Mat adjoint(const Value& v) const;
  bool reached(const Value& v) const {
    return !v.is_const() && v.node_ < static_cast<int>(has_adj_.size()) &&
           has_adj_[v.node_];
  }

  template <class E>
  void accum(const Value& v, const E& expr) {
    if (v.is_const()) return;
    if (v.tape_ != this)
      raise(ErrorKind::kInvalidInput, "adjoint accumulation across tapes");
    Mat& slot = adjoints_[v.node_];
    if (!has_adj_[v.node_]) {
      slot = expr;
      has_adj_[v.node_] = 1;
    } else {
      slot += expr;
    }
  }

  // Clears nodes but keeps allocated capacity; invalidates old Values.
  void reset();

  // Accumulated signature of non-smooth activation states (clamp active
  // sets, zero-magnitude bins). Two evaluations with different signatures
  // straddle a kink.
  uint64_t smooth_hash() const { return smooth_hash_; }
  void fold_smooth(uint64_t x) {
    x *= 0x9E3779B97F4A7C15ull;
    x ^= x >> 29;
    smooth_hash_ = (smooth_hash_ ^ x) * 0x100000001B3ull;
  }
  int next_node_id() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<Mat> adjoints_;
  std::vector<uint8_t> has_adj_;
  uint64_t smooth_hash_ = 1469598103934665603ull;
};

// --- primitive operations ---------------------------------------------------

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);  // elementwise
Value div(const Value& a, const Value& b);  // elementwise
Value scale(const Value& a, double c);
Value add_scalar(const Value& a, double c);
// s is 1x1; out = s * m
Value smul(const Value& s, const Value& m);
Value matmul(const Value& a, const Value& b, bool trans_a = false,
             bool trans_b = false);
Value transpose(const Value& a);
Value take_cols(const Value& a, int n);
Value pad_cols(const Value& a, int n);
Value take_rows(const Value& a, const std::vector<int>& rows);
Value vstack(const Value& a, const Value& b);
Value stack_cols(const std::vector<Value>& cols);
Value row_mul_vec(const Value& a, const Vec& v);
Value row_add_vec(const Value& a, const Vec& v);
Value cmul(const Value& a, const Mat& m);
Value sum(const Value& a);
Value mean(const Value& a);
Value dot(const Value& a, const Value& b);
Value norm_sq(const Value& a);
Value clamp(const Value& a, double lo, double hi);
Value log10(const Value& a);
Value tanh(const Value& a);
Value sigmoid(const Value& a);
Value softmax_vec(const Value& a);

// Complex matrices ride the tape as (re, im) pairs.
struct SpecVar {
  Value re, im;
};

SpecVar complex_from_polar(const Value& amp, const Value& phase);
Value modulus(const SpecVar& z);
// z / |z| with (1, 0) and zero subgradient at z = 0.
SpecVar unit_phase(const SpecVar& z);

// --- gradient checking -------------------------------------------------------

struct GradCheckOptions {
  double fd_step = 1e-5;
  double tol = 1e-5;
  // Input elements with |x| <= value_floor are skipped.
  double value_floor = 0.0;
  // Gradient pairs whose larger magnitude is below this count as matching.
  double abs_floor = 1e-10;
  // The relative-error denominator is floored at scale_floor_rel times the
  // largest analytic gradient magnitude: central differences carry an
  // absolute round-off floor of roughly eps * |f| / step, so components many
  // orders below the gradient scale cannot be resolved element-relative.
  double scale_floor_rel = 1e-6;
  int max_failures = 16;
};

struct GradCheckElement {
  int index;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckReport {
  int n_checked = 0;
  int n_excluded_floor = 0;
  int n_excluded_nonsmooth = 0;
  double max_rel_error = 0.0;
  int worst_index = -1;
  bool passed = false;
  std::vector<GradCheckElement> failures;
};

using ScalarFn = std::function<Value(Tape&, const Value&)>;

// Reverse-mode gradient vs central finite differences, elementwise. Elements
// whose difference stencil changes any non-smooth activation state are
// excluded and counted in the report.
GradCheckReport grad_check(const ScalarFn& fn, const Mat& x0,
                           const GradCheckOptions& opts);

}  // namespace melwave::ad

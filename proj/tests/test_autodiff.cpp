// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "melwave/autodiff.hpp"
#include "melwave/diffsignal.hpp"
#include "melwave/loss.hpp"
#include "melwave/mel.hpp"
#include "melwave/phase.hpp"
#include "melwave/signal.hpp"

using namespace melwave;
using ad::SpecVar;
using ad::Tape;
using ad::Value;

namespace {

Mat rnd(int r, int c, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uni(rng);
  return m;
}

double contract(const Mat& a, const Mat& b) {
  return a.cwiseProduct(b).sum();
}

// Inner-product (dot) test: reverse-mode VJP against an analytic forward-mode
// directional derivative written out in this file, contracted with a fixed
// random cotangent. The two routes must agree to 1e-10.
void dot_test(const char* name,
              const std::function<Value(Tape&, const std::vector<Value>&)>& build,
              const std::vector<Mat>& x,
              const std::function<double(const std::vector<Mat>&,
                                         const std::vector<Mat>&)>& jvp_dot,
              uint64_t seed) {
  CAPTURE(name);
  Tape tape;
  std::vector<Value> leaves;
  for (const Mat& m : x) leaves.push_back(tape.input(m));
  Value s = build(tape, leaves);
  REQUIRE(s.val().size() == 1);
  tape.backward(s);

  std::vector<Mat> v;
  for (size_t i = 0; i < x.size(); ++i)
    v.push_back(rnd(static_cast<int>(x[i].rows()), static_cast<int>(x[i].cols()),
                    seed + 1000 * i + 7));
  const double lhs = jvp_dot(x, v);
  double rhs = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    rhs += contract(tape.adjoint(leaves[i]), v[i]);
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-6});
  CHECK(std::abs(lhs - rhs) / scale < 1e-10);
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("dot and add backward are exact") {
  Tape t;
  Mat a = rnd(3, 4, 1), b = rnd(3, 4, 2);
  Value va = t.input(a), vb = t.input(b);
  Value s = ad::dot(va, vb);
  CHECK(s.val()(0, 0) == doctest::Approx(contract(a, b)).epsilon(1e-15));
  t.backward(s);
  CHECK((t.adjoint(va) - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((t.adjoint(vb) - a).cwiseAbs().maxCoeff() == 0.0);

  Tape t2;
  Value p = t2.input(a), q = t2.input(b);
  Value s2 = ad::sum(ad::add(p, q));
  t2.backward(s2);
  CHECK((t2.adjoint(p).array() == 1.0).all());
  CHECK((t2.adjoint(q).array() == 1.0).all());
}

TEST_CASE("elementwise primitives pass the inner-product test") {
  const Mat U = rnd(4, 5, 100);
  auto with_u = [&U](std::function<Value(Tape&, const std::vector<Value>&)> f) {
    return [f, &U](Tape& t, const std::vector<Value>& in) {
      return ad::dot(f(t, in), Value::constant(U));
    };
  };

  dot_test("add", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::add(in[0], in[1]);
           }),
           {rnd(4, 5, 1), rnd(4, 5, 2)},
           [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
             return contract(v[0] + v[1], U);
           },
           11);

  dot_test("sub", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::sub(in[0], in[1]);
           }),
           {rnd(4, 5, 3), rnd(4, 5, 4)},
           [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
             return contract(v[0] - v[1], U);
           },
           13);

  dot_test("mul", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::mul(in[0], in[1]);
           }),
           {rnd(4, 5, 5), rnd(4, 5, 6)},
           [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             return contract(v[0].cwiseProduct(x[1]) + x[0].cwiseProduct(v[1]), U);
           },
           17);

  dot_test("div", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::div(in[0], in[1]);
           }),
           {rnd(4, 5, 7), rnd(4, 5, 8, 0.5, 2.0)},
           [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             Mat j = v[0].cwiseQuotient(x[1]) -
                     x[0].cwiseProduct(v[1]).cwiseQuotient(x[1].cwiseProduct(x[1]));
             return contract(j, U);
           },
           19);

  dot_test("tanh", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::tanh(in[0]);
           }),
           {rnd(4, 5, 9)},
           [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             Mat th = x[0].array().tanh();
             return contract(v[0].cwiseProduct((1.0 - th.array().square()).matrix()), U);
           },
           23);

  dot_test("sigmoid", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::sigmoid(in[0]);
           }),
           {rnd(4, 5, 10)},
           [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             Mat s = (1.0 / (1.0 + (-x[0].array()).exp())).matrix();
             return contract(
                 v[0].cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())), U);
           },
           29);

  dot_test("log10", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::log10(in[0]);
           }),
           {rnd(4, 5, 12, 0.2, 3.0)},
           [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             constexpr double inv_ln10 = 0.43429448190325176;
             return contract(Mat(v[0].cwiseQuotient(x[0]) * inv_ln10), U);
           },
           31);

  dot_test("clamp", with_u([](Tape&, const std::vector<Value>& in) {
             return ad::clamp(in[0], -0.5, 0.5);
           }),
           {rnd(4, 5, 13)},
           [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             Mat j = v[0];
             for (Eigen::Index i = 0; i < j.size(); ++i)
               if (x[0].data()[i] <= -0.5 || x[0].data()[i] >= 0.5)
                 j.data()[i] = 0.0;
             return contract(j, U);
           },
           37);

  dot_test("scale/add_scalar",
           with_u([](Tape&, const std::vector<Value>& in) {
             return ad::add_scalar(ad::scale(in[0], -2.5), 0.75);
           }),
           {rnd(4, 5, 14)},
           [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
             return contract(Mat(-2.5 * v[0]), U);
           },
           41);
}

TEST_CASE("matmul passes the inner-product test in every transpose mode") {
  for (int mode = 0; mode < 4; ++mode) {
    const bool ta = mode & 1, tb = mode & 2;
    Mat a = ta ? rnd(5, 3, 50 + mode) : rnd(3, 5, 50 + mode);
    Mat b = tb ? rnd(4, 5, 60 + mode) : rnd(5, 4, 60 + mode);
    const Mat U = rnd(3, 4, 70 + mode);
    dot_test("matmul",
             [ta, tb, &U](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::matmul(in[0], in[1], ta, tb),
                              Value::constant(U));
             },
             {a, b},
             [ta, tb, &U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
               auto op = [](const Mat& m, bool t) {
                 return t ? Mat(m.transpose()) : m;
               };
               Mat j = op(v[0], ta) * op(x[1], tb) + op(x[0], ta) * op(v[1], tb);
               return contract(j, U);
             },
             80 + mode);
  }
}

TEST_CASE("shape primitives pass the inner-product test") {
  {
    const Mat U = rnd(3, 2, 200);
    dot_test("take_cols",
             [&U](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::take_cols(in[0], 2), Value::constant(U));
             },
             {rnd(3, 6, 201)},
             [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
               return contract(Mat(v[0].leftCols(2)), U);
             },
             202);
  }
  {
    const Mat U = rnd(3, 8, 210);
    dot_test("pad_cols",
             [&U](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::pad_cols(in[0], 8), Value::constant(U));
             },
             {rnd(3, 5, 211)},
             [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat p = Mat::Zero(3, 8);
               p.leftCols(5) = v[0];
               return contract(p, U);
             },
             212);
  }
  {
    const std::vector<int> rows{2, 0, 2, 3};
    const Mat U = rnd(4, 5, 220);
    dot_test("take_rows",
             [&U, rows](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::take_rows(in[0], rows), Value::constant(U));
             },
             {rnd(6, 5, 221)},
             [&U, rows](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat g(4, 5);
               for (size_t i = 0; i < rows.size(); ++i) g.row(i) = v[0].row(rows[i]);
               return contract(g, U);
             },
             222);
  }
  {
    const Mat U = rnd(7, 1, 230);
    dot_test("vstack",
             [&U](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::vstack(in[0], in[1]), Value::constant(U));
             },
             {rnd(3, 1, 231), rnd(4, 1, 232)},
             [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat s(7, 1);
               s.topRows(3) = v[0];
               s.bottomRows(4) = v[1];
               return contract(s, U);
             },
             233);
  }
  {
    const Mat U = rnd(3, 2, 240);
    dot_test("stack_cols+transpose",
             [&U](Tape&, const std::vector<Value>& in) {
               Value m = ad::stack_cols({in[0], in[1]});
               return ad::dot(ad::transpose(ad::transpose(m)), Value::constant(U));
             },
             {rnd(3, 1, 241), rnd(3, 1, 242)},
             [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat s(3, 2);
               s.col(0) = v[0];
               s.col(1) = v[1];
               return contract(s, U);
             },
             243);
  }
  {
    Vec w = rnd(1, 6, 250).transpose();
    const Mat U = rnd(4, 6, 251);
    dot_test("row_mul_vec/row_add_vec",
             [&U, w](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::row_add_vec(ad::row_mul_vec(in[0], w), w),
                              Value::constant(U));
             },
             {rnd(4, 6, 252)},
             [&U, w](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat j = v[0].array().rowwise() * w.transpose().array();
               return contract(j, U);
             },
             253);
  }
  {
    const Mat C = rnd(4, 6, 260);
    const Mat U = rnd(4, 6, 261);
    dot_test("cmul",
             [&U, &C](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::cmul(in[0], C), Value::constant(U));
             },
             {rnd(4, 6, 262)},
             [&U, &C](const std::vector<Mat>&, const std::vector<Mat>& v) {
               return contract(v[0].cwiseProduct(C), U);
             },
             263);
  }
}

TEST_CASE("reductions pass the inner-product test") {
  dot_test("sum",
           [](Tape&, const std::vector<Value>& in) { return ad::sum(in[0]); },
           {rnd(5, 7, 301)},
           [](const std::vector<Mat>&, const std::vector<Mat>& v) {
             return v[0].sum();
           },
           302);
  dot_test("mean",
           [](Tape&, const std::vector<Value>& in) { return ad::mean(in[0]); },
           {rnd(5, 7, 303)},
           [](const std::vector<Mat>&, const std::vector<Mat>& v) {
             return v[0].sum() / 35.0;
           },
           304);
  dot_test("norm_sq",
           [](Tape&, const std::vector<Value>& in) { return ad::norm_sq(in[0]); },
           {rnd(5, 7, 305)},
           [](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             return 2.0 * contract(x[0], v[0]);
           },
           306);
  dot_test("dot",
           [](Tape&, const std::vector<Value>& in) {
             return ad::dot(in[0], in[1]);
           },
           {rnd(5, 7, 307), rnd(5, 7, 308)},
           [](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             return contract(v[0], x[1]) + contract(x[0], v[1]);
           },
           309);
  {
    const Mat M = rnd(4, 6, 310);
    const Mat U = rnd(4, 6, 311);
    dot_test("smul",
             [&U, &M](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::smul(in[0], Value::constant(M)),
                              Value::constant(U));
             },
             {rnd(1, 1, 312)},
             [&U, &M](const std::vector<Mat>&, const std::vector<Mat>& v) {
               return contract(Mat(v[0](0, 0) * M), U);
             },
             313);
  }
  {
    const Mat U = rnd(6, 1, 320);
    dot_test("softmax_vec",
             [&U](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::softmax_vec(in[0]), Value::constant(U));
             },
             {rnd(6, 1, 321)},
             [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
               const double mx = x[0].maxCoeff();
               Mat e = (x[0].array() - mx).exp();
               Mat s = e / e.sum();
               const double sv = contract(s, v[0]);
               Mat j = s.cwiseProduct((v[0].array() - sv).matrix());
               return contract(j, U);
             },
             322);
  }
}

TEST_CASE("complex primitives pass the inner-product test") {
  const Mat U1 = rnd(3, 5, 400), U2 = rnd(3, 5, 401);
  dot_test("complex_from_polar",
           [&U1, &U2](Tape&, const std::vector<Value>& in) {
             SpecVar z = ad::complex_from_polar(in[0], in[1]);
             return ad::add(ad::dot(z.re, Value::constant(U1)),
                            ad::dot(z.im, Value::constant(U2)));
           },
           {rnd(3, 5, 402, 0.1, 2.0), rnd(3, 5, 403, -3.0, 3.0)},
           [&U1, &U2](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             Mat c = x[1].array().cos(), s = x[1].array().sin();
             Mat jre = v[0].cwiseProduct(c) - x[0].cwiseProduct(s).cwiseProduct(v[1]);
             Mat jim = v[0].cwiseProduct(s) + x[0].cwiseProduct(c).cwiseProduct(v[1]);
             return contract(jre, U1) + contract(jim, U2);
           },
           404);

  const Mat U = rnd(3, 5, 410);
  dot_test("modulus",
           [&U](Tape&, const std::vector<Value>& in) {
             return ad::dot(ad::modulus({in[0], in[1]}), Value::constant(U));
           },
           {rnd(3, 5, 411, 0.2, 1.0), rnd(3, 5, 412, 0.2, 1.0)},
           [&U](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             Mat m = (x[0].array().square() + x[1].array().square()).sqrt().matrix();
             Mat j = (x[0].cwiseProduct(v[0]) + x[1].cwiseProduct(v[1]))
                         .cwiseQuotient(m);
             return contract(j, U);
           },
           413);

  dot_test("unit_phase",
           [&U1, &U2](Tape&, const std::vector<Value>& in) {
             SpecVar u = ad::unit_phase({in[0], in[1]});
             return ad::add(ad::dot(u.re, Value::constant(U1)),
                            ad::dot(u.im, Value::constant(U2)));
           },
           {rnd(3, 5, 420, 0.2, 1.0), rnd(3, 5, 421, 0.2, 1.0)},
           [&U1, &U2](const std::vector<Mat>& x, const std::vector<Mat>& v) {
             double acc = 0.0;
             for (Eigen::Index i = 0; i < x[0].size(); ++i) {
               const double re = x[0].data()[i], im = x[1].data()[i];
               const double m3 = std::pow(re * re + im * im, 1.5);
               const double jre =
                   (im * im * v[0].data()[i] - re * im * v[1].data()[i]) / m3;
               const double jim =
                   (-re * im * v[0].data()[i] + re * re * v[1].data()[i]) / m3;
               acc += jre * U1.data()[i] + jim * U2.data()[i];
             }
             return acc;
           },
           422);
}

TEST_CASE("spectral primitives pass the inner-product test") {
  auto fft = std::make_shared<const Fft>(16);
  {
    const Mat U1 = rnd(3, 9, 500), U2 = rnd(3, 9, 501);
    dot_test("rfft_rows",
             [&U1, &U2, fft](Tape&, const std::vector<Value>& in) {
               SpecVar z = ad::rfft_rows(in[0], fft);
               return ad::add(ad::dot(z.re, Value::constant(U1)),
                              ad::dot(z.im, Value::constant(U2)));
             },
             {rnd(3, 16, 502)},
             [&U1, &U2, fft](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat re(3, 9), im(3, 9);
               for (int f = 0; f < 3; ++f)
                 fft->forward_real(v[0].row(f).data(), re.row(f).data(),
                                   im.row(f).data());
               return contract(re, U1) + contract(im, U2);
             },
             503);
  }
  {
    const Mat U = rnd(3, 16, 510);
    dot_test("irfft_rows",
             [&U, fft](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::irfft_rows({in[0], in[1]}, fft),
                              Value::constant(U));
             },
             {rnd(3, 9, 511), rnd(3, 9, 512)},
             [&U, fft](const std::vector<Mat>&, const std::vector<Mat>& v) {
               // the map ignores imaginary DC/Nyquist parts
               Mat vim = v[1];
               vim.col(0).setZero();
               vim.col(8).setZero();
               Mat x(3, 16);
               for (int f = 0; f < 3; ++f)
                 fft->inverse_real(v[0].row(f).data(), vim.row(f).data(),
                                   x.row(f).data());
               return contract(x, U);
             },
             513);
  }
  {
    const Mat U = rnd(4, 6, 520);
    dot_test("frames_from_signal",
             [&U](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::frames_from_signal(in[0], 6, 2),
                              Value::constant(U));
             },
             {rnd(1, 12, 521)},
             [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat f(4, 6);
               for (int t = 0; t < 4; ++t) f.row(t) = v[0].block(0, 2 * t, 1, 6);
               return contract(f, U);
             },
             522);
  }
  {
    const Mat U = rnd(1, 12, 530);
    dot_test("overlap_add",
             [&U](Tape&, const std::vector<Value>& in) {
               return ad::dot(ad::overlap_add(in[0], 2), Value::constant(U));
             },
             {rnd(4, 6, 531)},
             [&U](const std::vector<Mat>&, const std::vector<Mat>& v) {
               Mat y = Mat::Zero(1, 12);
               for (int t = 0; t < 4; ++t) y.block(0, 2 * t, 1, 6) += v[0].row(t);
               return contract(y, U);
             },
             532);
  }
}

TEST_CASE("backward basics and error paths") {
  Tape t;
  Mat x0 = rnd(4, 1, 601);
  Value x = t.input(x0);
  Value loss = ad::norm_sq(x);
  t.backward(loss);
  CHECK((t.adjoint(x) - Mat(2.0 * x0)).cwiseAbs().maxCoeff() < 1e-15);

  // identity: d(sum(x))/dx = all ones
  Tape t1;
  Value y = t1.input(x0);
  Value s = ad::sum(y);
  t1.backward(s);
  CHECK((t1.adjoint(y).array() == 1.0).all());

  // unreachable input gets a zero adjoint
  Tape t2;
  Value a = t2.input(x0);
  Value b = t2.input(x0);
  Value l2 = ad::sum(a);
  t2.backward(l2);
  CHECK(t2.adjoint(b).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(t2.reached(b));

  // non-scalar loss is rejected
  Tape t3;
  Value m = t3.input(rnd(2, 3, 602));
  CHECK_THROWS_AS(t3.backward(m), Error);

  // modulus gradient at 3+4i is (0.6, 0.8)
  Tape t4;
  Value re = t4.input(Mat::Constant(1, 1, 3.0));
  Value im = t4.input(Mat::Constant(1, 1, 4.0));
  Value mag = ad::modulus({re, im});
  CHECK(mag.val()(0, 0) == 5.0);
  t4.backward(mag);
  CHECK(t4.adjoint(re)(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(t4.adjoint(im)(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("zero-magnitude bins take the declared subgradient") {
  Tape t;
  Value re = t.input(Mat::Zero(1, 3));
  Value im = t.input(Mat::Zero(1, 3));
  SpecVar u = ad::unit_phase({re, im});
  CHECK(u.re.val()(0, 1) == 1.0);  // zero-phase convention
  CHECK(u.im.val()(0, 1) == 0.0);
  Value l = ad::add(ad::sum(u.re), ad::sum(u.im));
  t.backward(l);
  CHECK(t.adjoint(re).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.adjoint(im).cwiseAbs().maxCoeff() == 0.0);

  Tape t2;
  Value zre = t2.input(Mat::Zero(1, 2));
  Value zim = t2.input(Mat::Zero(1, 2));
  Value mag = ad::sum(ad::modulus({zre, zim}));
  t2.backward(mag);
  CHECK(t2.adjoint(zre).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t2.adjoint(zim).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradients are deterministic") {
  Mat x0 = rnd(6, 3, 611);
  auto run = [&x0]() {
    Tape t;
    Value x = t.input(x0);
    Value l = ad::mean(ad::mul(ad::tanh(x), x));
    t.backward(l);
    return t.adjoint(x);
  };
  Mat g1 = run(), g2 = run();
  CHECK((g1 - g2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("taped pipeline matches the plain pipeline") {
  const StftConfig cfg{64, 16, 64, WindowKind::kPeriodicHann};
  MelFilterbank fb = build_filterbank(10, 16000, 64, 0.0, 8000.0);
  ad::StftPlan plan = ad::make_stft_plan(cfg);
  GriffinLimConfig gl{2, PhaseInit::kZero, 0};

  Mat mel = rnd(6, 10, 621, 0.5, 4.0);
  MelSpectrogram m;
  m.values = mel;

  AmplitudeSpectrogram A = epsilon_amplitude(m, fb, cfg);
  ComplexSpectrogram X = griffin_lim(A, gl);
  Waveform w = istft(X, 16000);

  Tape tape;
  Value mv = tape.input(mel);
  Value amp = ad::taped_epsilon_amplitude(mv, fb);
  CHECK((amp.val() - A.values).cwiseAbs().maxCoeff() == 0.0);
  SpecVar spec = ad::taped_griffin_lim(amp, plan, gl);
  CHECK((spec.re.val() - X.re).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((spec.im.val() - X.im).cwiseAbs().maxCoeff() < 1e-12);
  Value wave = ad::taped_istft(spec, plan);
  Mat w_row = w.samples.transpose();
  CHECK((wave.val() - w_row).cwiseAbs().maxCoeff() < 1e-12);

  // and the scalar loss agrees with the plain implementation
  Waveform ref = w;
  for (Eigen::Index i = 0; i < ref.samples.size(); ++i)
    ref.samples[i] = 0.9 * ref.samples[i] + 0.01;
  Mat ref_row = ref.samples.transpose();
  Value lt = ad::taped_loss_t(wave, Value::constant(ref_row));
  CHECK(lt.val()(0, 0) == doctest::Approx(loss_t(w, ref)).epsilon(1e-13));
}

TEST_CASE("grad_check validates loss_f") {
  const Mat target = rnd(5, 8, 631);
  ad::ScalarFn fn = [&target](Tape&, const Value& x) {
    return ad::taped_loss_f(x, Value::constant(target));
  };
  ad::GradCheckOptions opts;
  opts.fd_step = 1e-6;
  opts.tol = 1e-6;
  ad::GradCheckReport r = ad::grad_check(fn, rnd(5, 8, 632), opts);
  CHECK(r.passed);
  CHECK(r.n_checked == 40);
}

TEST_CASE("grad_check validates si_sdr away from the clamp") {
  Mat ref = rnd(1, 64, 641);
  Mat est = ref + 0.3 * rnd(1, 64, 642);
  ad::ScalarFn fn = [&ref](Tape&, const Value& x) {
    return ad::taped_si_sdr(x, Value::constant(ref));
  };
  ad::GradCheckOptions opts;
  opts.fd_step = 1e-6;
  opts.tol = 1e-5;
  ad::GradCheckReport r = ad::grad_check(fn, est, opts);
  CHECK(r.passed);
  CHECK(r.n_excluded_nonsmooth == 0);
}

TEST_CASE("grad_check differentiates the full time-domain loss") {
  // small geometry keeps this fast; the acceptance suite runs the full one
  const StftConfig cfg{64, 16, 64, WindowKind::kPeriodicHann};
  MelFilterbank fb = build_filterbank(10, 16000, 64, 0.0, 8000.0);
  ad::StftPlan plan = ad::make_stft_plan(cfg);
  GriffinLimConfig gl{1, PhaseInit::kZero, 0};

  // target mel from a synthetic tone; input mel is a perturbed copy
  Waveform tone;
  tone.sample_rate = 16000;
  tone.samples.resize(64 + 16 * 5);
  for (Eigen::Index i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.6 * std::sin(0.7 * i) + 0.3 * std::sin(0.23 * i + 0.5);
  MelSpectrogram target = mel_spectrum(amplitude(stft(tone, cfg)), fb);
  Waveform ref = reconstruct(target, fb, cfg, gl);
  Mat ref_row = ref.samples.transpose();

  Mat mel0 =
      target.values +
      0.05 * rnd(static_cast<int>(target.frames()), 10, 651).cwiseAbs();

  ad::ScalarFn fn = [&](Tape& tape, const Value& x) {
    return ad::taped_time_loss_from_mel(x, fb, plan, gl, ref_row);
  };
  ad::GradCheckOptions opts;
  opts.fd_step = 1e-5;
  opts.tol = 1e-3;
  opts.value_floor = 1e-3;
  opts.abs_floor = 1e-8;
  ad::GradCheckReport r = ad::grad_check(fn, mel0, opts);
  CAPTURE(r.max_rel_error);
  CAPTURE(r.n_checked);
  CAPTURE(r.n_excluded_nonsmooth);
  CHECK(r.passed);
  CHECK(r.n_checked > 0);
}

TEST_CASE("grad_check differentiates the joint criterion end to end") {
  // the trainer's gradient: loss_f on normalized features plus the scaled
  // time loss through denormalize -> amplitude estimate -> griffin-lim ->
  // istft, all with respect to the predicted (normalized) mel
  const StftConfig cfg{64, 16, 64, WindowKind::kPeriodicHann};
  MelFilterbank fb = build_filterbank(10, 16000, 64, 0.0, 8000.0);
  ad::StftPlan plan = ad::make_stft_plan(cfg);
  GriffinLimConfig gl{1, PhaseInit::kZero, 0};
  const double lambda = 1e-3;

  Waveform tone;
  tone.sample_rate = 16000;
  tone.samples.resize(64 + 16 * 5);
  for (Eigen::Index i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.5 * std::sin(0.61 * i) + 0.35 * std::sin(0.19 * i);
  MelSpectrogram target_raw = mel_spectrum(amplitude(stft(tone, cfg)), fb);
  NormStats stats;
  stats.mean = target_raw.values.colwise().mean().transpose();
  stats.std = Vec::Constant(10, 0.7);
  Mat target_norm = normalize(target_raw, stats).values;
  Waveform ref = reconstruct(target_raw, fb, cfg, gl);
  Mat ref_row = ref.samples.transpose();

  Mat mel0 = target_norm;
  for (Eigen::Index t = 0; t < mel0.rows(); ++t)
    for (Eigen::Index ch = 0; ch < mel0.cols(); ++ch)
      mel0(t, ch) += 0.2 * std::sin(0.9 * t + 0.41 * ch);

  ad::ScalarFn fn = [&](Tape&, const Value& x) {
    Value lf = ad::taped_loss_f(x, Value::constant(target_norm));
    Value mel_raw = ad::taped_denormalize(x, stats);
    Value amp = ad::taped_epsilon_amplitude(mel_raw, fb);
    SpecVar spec = ad::taped_griffin_lim(amp, plan, gl);
    Value wave = ad::taped_istft(spec, plan);
    Value lt = ad::taped_loss_t(wave, Value::constant(ref_row));
    return ad::add(lf, ad::scale(lt, lambda));
  };
  ad::GradCheckOptions opts;
  opts.fd_step = 1e-5;
  opts.tol = 1e-3;
  opts.value_floor = 1e-3;
  opts.scale_floor_rel = 1e-4;
  ad::GradCheckReport r = ad::grad_check(fn, mel0, opts);
  CAPTURE(r.max_rel_error);
  CHECK(r.passed);
  CHECK(r.n_checked > 30);
}

TEST_CASE("grad_check excludes elements whose stencil crosses a kink") {
  // x[0] sits on the clamp boundary within one fd step
  Mat x0(1, 4);
  x0 << 0.5 - 1e-7, 0.2, -0.4, 0.45;
  ad::ScalarFn fn = [](Tape&, const Value& x) {
    return ad::sum(ad::clamp(x, -0.5, 0.5));
  };
  ad::GradCheckOptions opts;
  opts.fd_step = 1e-5;
  opts.tol = 1e-6;
  ad::GradCheckReport r = ad::grad_check(fn, x0, opts);
  CHECK(r.n_excluded_nonsmooth == 1);
  CHECK(r.n_checked == 3);
  CHECK(r.passed);
}

TEST_SUITE_END();

#include "smartreply/autodiff.h"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "smartreply/rng.h"

namespace smartreply {
namespace {

using TapeD = BasicTape<double>;
using VarD = BasicVar<double>;
using TensorD = BasicTensor<double>;

TensorD RandomD(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  TensorD t = SampleGaussian(rng, {r, c}).Cast<double>();
  for (double& v : t.mutable_data()) v *= scale;
  return t;
}

TEST(BackwardTest, QuadraticGradient) {
  Tape tape;
  Tensor w = Tensor::Vector({1, 2});
  Var wv = tape.Parameter(w);
  Var loss = ad::SumAll(ad::Mul(wv, wv));
  tape.Backward(loss);
  EXPECT_EQ(tape.ParamGrad(w), Tensor::Vector({2, 4}));
}

TEST(BackwardTest, ZeroActivationGivesZeroGradient) {
  Tape tape;
  Tensor c = Tensor::Vector({3.5f});
  Var x = tape.Constant(Tensor::Vector({0.0f}));
  Var loss = ad::SumAll(ad::Mul(ad::Tanh(x), tape.Parameter(c)));
  tape.Backward(loss);
  EXPECT_EQ(tape.ParamGrad(c)[0], 0.0f);
}

TEST(BackwardTest, UnreachedLeafGetsZero) {
  Tape tape;
  Tensor used = Tensor::Vector({1, 1}), unused = Tensor::Vector({5, 5});
  Var a = tape.Parameter(used);
  tape.Parameter(unused);
  tape.Backward(ad::SumAll(a));
  EXPECT_EQ(tape.ParamGrad(unused), Tensor::Vector({0, 0}));
}

TEST(BackwardTest, NonScalarLossIsContractError) {
  Tape tape;
  Tensor w = Tensor::Vector({1, 2});
  EXPECT_THROW(tape.Backward(tape.Parameter(w)), ContractError);
}

TEST(BackwardTest, TraversesInExactReverseOrder) {
  Tape tape;
  Tensor w = Tensor::Vector({1});
  std::vector<int> visited;
  Var v = tape.Parameter(w);
  for (int k = 0; k < 4; ++k) {
    v = tape.Record("probe", v.value(), {v.id()},
                    [&visited, prev = v.id()](Tape& t, int self) {
                      visited.push_back(self);
                      t.GradRef(prev)[0] += t.GradRef(self)[0];
                    });
  }
  tape.Backward(v);
  ASSERT_EQ(visited.size(), 4u);
  for (std::size_t i = 1; i < visited.size(); ++i) {
    EXPECT_GT(visited[i - 1], visited[i]);
  }
}

TEST(BackwardTest, NonFiniteForwardIsAnError) {
  Tape tape(false);
  Var x = tape.Constant(Tensor::Vector({0.0f}));
  EXPECT_THROW(ad::Log(x), NumericError);
}

TEST(ForwardTest, DeterministicBitwise) {
  Rng rng(3);
  Tensor w = SampleGaussian(rng, {5, 4});
  Tensor x = SampleGaussian(rng, {3, 5});
  auto run = [&]() {
    Tape tape(false);
    return ad::Tanh(ad::MatMul(tape.Constant(x), tape.Parameter(w))).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheckTest, SquareFunction) {
  TensorD x = TensorD::Vector({3.0});
  auto f = [&](TapeD& tape) {
    VarD v = tape.Parameter(x);
    return ad::SumAll(ad::Mul(v, v));
  };
  GradCheckResult r = GradCheck<double>(f, {&x}, 1e-4);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheckTest, RandomTwoLayerNetAtStepOneThousandth) {
  Rng rng(17);
  TensorD x = RandomD(rng, 4, 5);
  TensorD w1 = RandomD(rng, 5, 6, 0.5), b1 = RandomD(rng, 1, 6, 0.1);
  TensorD w2 = RandomD(rng, 6, 3, 0.5), b2 = RandomD(rng, 1, 3, 0.1);
  auto f = [&](TapeD& tape) {
    VarD h = ad::Tanh(ad::Add(ad::MatMul(tape.Constant(x), tape.Parameter(w1)),
                              tape.Parameter(b1)));
    VarD y = ad::Add(ad::MatMul(h, tape.Parameter(w2)), tape.Parameter(b2));
    return ad::SumAll(ad::Mul(y, y));
  };
  GradCheckResult r = GradCheck<double>(f, {&w1, &b1, &w2, &b2}, 1e-3);
  EXPECT_LT(r.max_relative_error, 1e-3)
      << "param " << r.worst_param << " idx " << r.worst_index;
}

TEST(GradCheckTest, SymmetricLossThreePairBatch) {
  Rng rng(23);
  TensorD xs = RandomD(rng, 3, 4), ys = RandomD(rng, 3, 4);
  auto f = [&](TapeD& tape) {
    VarD theta = ad::MatMul(tape.Parameter(xs), ad::Transpose(tape.Parameter(ys)));
    return ad::SymmetricNll(theta);
  };
  GradCheckResult r = GradCheck<double>(f, {&xs, &ys}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-3);
}

// Every op in the closed set, composed so each one's backward is exercised.
TEST(GradCheckTest, EveryOpType) {
  Rng rng(29);
  TensorD a = RandomD(rng, 3, 4), b = RandomD(rng, 3, 4);
  TensorD row = RandomD(rng, 1, 4), table = RandomD(rng, 5, 4);
  TensorD pos = RandomD(rng, 3, 4);
  for (double& v : pos.mutable_data()) v = std::abs(v) + 0.5;
  const std::vector<std::size_t> ids = {4, 0, 4};
  const std::vector<std::uint8_t> take = {1, 0, 1};
  auto f = [&](TapeD& tape) {
    VarD va = tape.Parameter(a), vb = tape.Parameter(b);
    VarD vrow = tape.Parameter(row), vt = tape.Parameter(table);
    VarD vp = tape.Parameter(pos);
    VarD s1 = ad::Sigmoid(ad::Sub(va, vb));
    VarD s2 = ad::Exp(ad::Scale(ad::Add(vb, vrow), 0.3));
    VarD s3 = ad::Log(vp);
    VarD g = ad::GatherRows(vt, ids);
    VarD sel = ad::SelectRows<double>(take, s1, g);
    std::vector<VarD> parts = {sel, s2, s3};
    VarD cat = ad::ConcatCols<double>(parts);
    std::vector<VarD> stack = {cat, ad::SliceRows(cat, 0, 1)};
    VarD tall = ad::ConcatRows<double>(stack);  // [4 x 12]
    VarD sl = ad::SliceRows(ad::SliceCols(tall, 2, 10), 1, 4);
    VarD tr = ad::Transpose(sl);
    VarD r1 = ad::SumRows(tr), r2 = ad::SumCols(tr);
    VarD sq = ad::MatMul(ad::Transpose(r2), r2);  // [3 x 3]
    return ad::Add(ad::Add(ad::MeanAll(ad::Mul(r1, r1)), ad::SumAll(sq)),
                   ad::SymmetricNll(ad::Scale(sq, 0.05)));
  };
  GradCheckResult r = GradCheck<double>(f, {&a, &b, &row, &table, &pos}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-3)
      << "param " << r.worst_param << " idx " << r.worst_index << " analytic "
      << r.analytic << " numeric " << r.numeric;
}

TEST(GradCheckTest, FloatAnalyticAgreesWithDoubleReference) {
  Rng rng(31);
  Tensor w = SampleGaussian(rng, {4, 3}), x = SampleGaussian(rng, {2, 4});
  Tape tape;
  tape.Backward(ad::SumAll(ad::Tanh(ad::MatMul(tape.Constant(x), tape.Parameter(w)))));
  Tensor gf = tape.ParamGrad(w);
  TensorD wd = w.Cast<double>(), xd = x.Cast<double>();
  TapeD td;
  td.Backward(ad::SumAll(ad::Tanh(ad::MatMul(td.Constant(xd), td.Parameter(wd)))));
  const TensorD& gd = td.ParamGrad(wd);
  for (std::size_t i = 0; i < gf.size(); ++i) EXPECT_NEAR(gf[i], gd[i], 1e-5);
}

TEST(SharedParameterTest, GradientsAccumulate) {
  Tape tape;
  Tensor w = Tensor::Vector({2});
  Var a = tape.Parameter(w);
  Var b = tape.Parameter(w);
  EXPECT_EQ(a.id(), b.id());
  tape.Backward(ad::SumAll(ad::Add(ad::Scale(a, 3.0f), ad::Scale(b, 4.0f))));
  EXPECT_EQ(tape.ParamGrad(w)[0], 7.0f);
}

}  // namespace
}  // namespace smartreply

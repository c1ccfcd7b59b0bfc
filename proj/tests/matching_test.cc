#include "smartreply/matching.h"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "smartreply/autodiff.h"
#include "smartreply/error.h"
#include "support/fixtures.h"

namespace smartreply {
namespace {

// Direct evaluation of the symmetric normalisation, no stabilisation.
double NaiveSymmetricLoss(const std::vector<std::vector<double>>& theta) {
  const std::size_t n = theta.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = -std::exp(theta[i][i]);
    for (std::size_t j = 0; j < n; ++j) denom += std::exp(theta[i][j]) + std::exp(theta[j][i]);
    total += -std::log(std::exp(theta[i][i]) / denom);
  }
  return total / static_cast<double>(n);
}

TEST(SymmetricLossTest, TrivialCases) {
  EXPECT_EQ(ad::SymmetricNllValue(Tensor::Matrix({{3.7f}})), 0.0);
  EXPECT_NEAR(ad::SymmetricNllValue(Tensor::Zeros(2, 2)), std::log(3.0), 1e-6);
  const double v = ad::SymmetricNllValue(Tensor::Matrix({{10, 0}, {0, 10}}));
  EXPECT_NEAR(v, NaiveSymmetricLoss({{10, 0}, {0, 10}}), 1e-9);
  EXPECT_NEAR(v, 9.1e-5, 0.05e-5);
  EXPECT_THROW(ad::SymmetricNllValue(Tensor::Zeros(2, 3)), ContractError);
}

TEST(SymmetricLossTest, MatchesNaiveOracleAndIsTransposeInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.Index(6);
    Tensor t = SampleGaussian(rng, {n, n});
    std::vector<std::vector<double>> th(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) th[i][j] = t.at(i, j);
    EXPECT_NEAR(ad::SymmetricNllValue(t), NaiveSymmetricLoss(th), 1e-9);
    EXPECT_NEAR(ad::SymmetricNllValue(t), ad::SymmetricNllValue(Transposed(t)), 1e-9);
    EXPECT_GT(ad::SymmetricNllValue(t), 0.0);  // p < 1 whenever n > 1
  }
  // Large scores must not overflow.
  EXPECT_TRUE(std::isfinite(ad::SymmetricNllValue(Tensor::Matrix({{500, -500}, {400, 900}}))));
}

TEST(MatchScoreTest, OrthonormalRetrieval) {
  Tensor eye = Tensor::Zeros(5, 5);
  for (std::size_t i = 0; i < 5; ++i) eye.at(i, i) = 1;
  std::vector<float> lm(5, 0.0f), msg = {0, 0, 0, 1, 0};
  MatchScores s = MatchScore(msg, eye, lm, 0.0f, 3);
  EXPECT_EQ(s.ids[0], 3u);
  double total = 0;
  for (float p : s.softmax) total += p;
  EXPECT_NEAR(total, 1.0, 1e-5);
  EXPECT_THROW(MatchScore(msg, eye, lm, 0.0f, 6), ContractError);
}

TEST(MatchScoreTest, TiesGoToLowerId) {
  Tensor r = Tensor::Matrix({{1, 0}, {0, 1}, {1, 0}});
  std::vector<float> lm(3, 0.0f), msg = {1, 0};
  MatchScores s = MatchScore(msg, r, lm, 0.0f, 3);
  EXPECT_EQ(s.ids, (std::vector<std::size_t>{0, 2, 1}));
}

// Dots 3, 2, 1 against lm -3, -1, 0: the lm order is reversed. Pairwise
// crossovers: (0,1) at alpha 1/2, (1,2) at 1, (0,2) at 2/3. Above alpha 1 the
// order is the lm order.
TEST(MatchScoreTest, LargeAlphaFollowsLmOrder) {
  Tensor r = Tensor::Matrix({{3}, {2}, {1}});
  std::vector<float> lm = {-3, -1, 0}, msg = {1};
  EXPECT_EQ(MatchScore(msg, r, lm, 0.4f, 3).ids, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(MatchScore(msg, r, lm, 0.6f, 3).ids, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(MatchScore(msg, r, lm, 0.8f, 3).ids, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(MatchScore(msg, r, lm, 1.5f, 3).ids, (std::vector<std::size_t>{2, 1, 0}));
}

TEST(MatchScoreTest, LmShiftPreservesOrder) {
  Rng rng(5);
  Tensor r = SampleGaussian(rng, {40, 8});
  Tensor m = SampleGaussian(rng, {1, 8});
  Tensor lm = SampleGaussian(rng, {40});
  std::vector<float> shifted(lm.vec());
  for (float& v : shifted) v -= 2.0f;
  auto a = MatchScore(m.data(), r, lm.data(), 0.25f, 10);
  auto b = MatchScore(m.data(), r, shifted, 0.25f, 10);
  EXPECT_EQ(a.ids, b.ids);
  for (std::size_t i = 1; i < a.raw.size(); ++i) EXPECT_GE(a.raw[i - 1], a.raw[i]);
}

TEST(TrainMatchingTest, RejectsTinyBatches) {
  MatchingConfig c;
  c.batch_size = 1;
  EXPECT_THROW(c.Validate(), ContractError);
  auto pairs = testing::TwoIntentCorpus(64, 1);
  Vocabulary v = Vocabulary::Build(pairs, 1);
  EncoderConfig ec;
  ec.vocab_size = v.size();
  auto enc = DualEncoder::Init(ec, 1);
  EncodedPairs data = EncodePairs(v, pairs);
  EXPECT_THROW(TrainMatching(enc, data, data, c), ContractError);
}

EncoderConfig Small(std::size_t vocab) {
  EncoderConfig ec;
  ec.vocab_size = vocab;
  ec.embedding_dim = 32;
  ec.hidden = 32;
  return ec;
}

TEST(TrainMatchingTest, SeparableCorpusHalvesValidationLoss) {
  auto pairs = testing::TwoIntentCorpus(3000, 7);
  Split split = SplitPairs(pairs, 0.1, 7);
  Vocabulary v = Vocabulary::Build(split.train, 1);
  auto enc = DualEncoder::Init(Small(v.size()), 3);
  MatchingConfig c;
  c.batch_size = 32;
  c.epochs = 4;
  TrainingReport rep;
  DualEncoder trained = TrainMatching(enc, EncodePairs(v, split.train),
                                      EncodePairs(v, split.validation), c, &rep);
  const double v0 = rep.epochs.front().validation_loss;
  EXPECT_LE(rep.best_validation_loss, 0.5 * v0)
      << "epoch0 " << v0 << " best " << rep.best_validation_loss;
  EXPECT_NEAR(MatchingLoss(trained, EncodePairs(v, split.validation), 32),
              rep.best_validation_loss, 1e-9);
}

TEST(TrainMatchingTest, FixedSeedsAreBitIdentical) {
  auto pairs = testing::TwoIntentCorpus(400, 2);
  Vocabulary v = Vocabulary::Build(pairs, 1);
  EncodedPairs data = EncodePairs(v, pairs);
  MatchingConfig c;
  c.batch_size = 16;
  c.epochs = 1;
  auto a = TrainMatching(DualEncoder::Init(Small(v.size()), 5), data, data, c);
  auto b = TrainMatching(DualEncoder::Init(Small(v.size()), 5), data, data, c);
  auto pa = a.NamedParameters();
  auto pb = b.NamedParameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(*pa[i].second == *pb[i].second);
}

}  // namespace
}  // namespace smartreply

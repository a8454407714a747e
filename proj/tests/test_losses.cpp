#include <cmath>

#include <gtest/gtest.h>

#include "hsum/error.hpp"
#include "hsum/losses.hpp"
#include "test_util.hpp"

using namespace hsum;

namespace {

ad::Var column(std::vector<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return ad::parameter(m);
}

ad::Var rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return ad::parameter(m);
}

}  // namespace

TEST(FocalLoss, PerfectPredictionsNearZero) {
  const std::vector<int> one{1}, zero{0};
  EXPECT_LE(focal_loss(std::vector<double>{1 - 1e-7}, one, 0.25, 2.0), 1e-12);
  EXPECT_LE(focal_loss(std::vector<double>{1e-7}, zero, 0.25, 2.0), 1e-12);
}

TEST(FocalLoss, ScalarValue) {
  const double expected = -0.25 * 0.25 * std::log(0.5);
  EXPECT_NEAR(expected, 0.04332, 5e-6);
  EXPECT_NEAR(focal_loss(std::vector<double>{0.5}, std::vector<int>{1}, 0.25, 2.0), expected,
              1e-15);
  const ad::Var p = column({0.5});
  EXPECT_NEAR(focal_loss(p, std::vector<int>{1}, 0.25, 2.0).scalar(), expected, 1e-15);
}

TEST(FocalLoss, NegativeClassUsesComplementAlpha) {
  const double p = 0.3;
  const double expected = -(0.75) * p * p * std::log(1 - p);
  EXPECT_NEAR(focal_loss(std::vector<double>{p}, std::vector<int>{0}, 0.25, 2.0), expected, 1e-15);
}

TEST(FocalLoss, GammaZeroAlphaHalfIsHalfBce) {
  Rng rng(3);
  std::vector<double> p(10);
  std::vector<int> y(10);
  double bce = 0;
  for (int i = 0; i < 10; ++i) {
    p[static_cast<std::size_t>(i)] = uniform(rng, 0.05, 0.95);
    y[static_cast<std::size_t>(i)] = i % 3 == 0;
    bce += y[static_cast<std::size_t>(i)] ? -std::log(p[static_cast<std::size_t>(i)])
                                          : -std::log(1 - p[static_cast<std::size_t>(i)]);
  }
  EXPECT_NEAR(focal_loss(p, y, 0.5, 0.0), 0.5 * bce / 10, 1e-14);
}

TEST(FocalLoss, GraphAndScalarAgree) {
  Rng rng(1);
  std::vector<double> p(7);
  std::vector<int> y(7);
  for (int i = 0; i < 7; ++i) {
    p[static_cast<std::size_t>(i)] = uniform01(rng);
    y[static_cast<std::size_t>(i)] = i % 2;
  }
  p[0] = 0.0;  // clamped
  p[1] = 1.0;
  EXPECT_NEAR(focal_loss(column(p), y, 0.25, 2.0).scalar(), focal_loss(p, y, 0.25, 2.0), 1e-14);
  EXPECT_TRUE(std::isfinite(focal_loss(p, y, 0.25, 2.0)));
}

TEST(FocalLoss, BadInputsThrow) {
  EXPECT_THROW(focal_loss(std::vector<double>{0.5, 0.5}, std::vector<int>{1}, 0.25, 2.0),
               DimensionError);
  EXPECT_THROW(focal_loss(std::vector<double>{0.5}, std::vector<int>{2}, 0.25, 2.0), RangeError);
  EXPECT_THROW(focal_loss(std::vector<double>{}, std::vector<int>{}, 0.25, 2.0), DimensionError);
}

TEST(MseLoss, Examples) {
  const std::vector<double> s{0.2, 0.7, 0.1};
  EXPECT_EQ(mse_replay_loss(s, s), 0.0);
  EXPECT_DOUBLE_EQ(mse_replay_loss(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(mse_replay_loss(std::vector<double>{0.5}, std::vector<double>{0.0}), 0.25);
  EXPECT_DOUBLE_EQ(mse_replay_loss(column({1, 0}), std::vector<double>{0, 1}).scalar(), 1.0);
  EXPECT_THROW(mse_replay_loss(std::vector<double>{1}, std::vector<double>{0, 1}),
               DimensionError);
}

TEST(InterContrastive, SingleSampleIsZero) {
  const ad::Var v = rows({{1, 0, 0}});
  const ad::Var t = rows({{0, 1, 0}});
  EXPECT_NEAR(inter_contrastive(v, t, 0.07).scalar(), 0.0, 1e-15);
}

TEST(InterContrastive, IdenticalEmbeddingsGiveLn2) {
  const ad::Var v = rows({{0.6, 0.8}, {0.6, 0.8}});
  const ad::Var t = rows({{0.6, 0.8}, {0.6, 0.8}});
  EXPECT_NEAR(inter_contrastive(v, t, 0.07).scalar(), std::log(2.0), 1e-12);
}

TEST(InterContrastive, PerfectSeparationApproachesZero) {
  const ad::Var v = rows({{1, 0}, {0, 1}});
  const ad::Var t = rows({{1, 0}, {0, 1}});
  const double l1 = inter_contrastive(v, t, 0.1).scalar();
  const double l2 = inter_contrastive(v, t, 0.01).scalar();
  EXPECT_LT(l2, l1);
  EXPECT_LT(l2, 1e-40);
}

TEST(InterContrastive, RenormalizesRows) {
  const ad::Var a = rows({{3, 0}, {0, 2}});
  const ad::Var b = rows({{1, 0}, {0, 1}});
  EXPECT_NEAR(inter_contrastive(a, b, 0.5).scalar(), inter_contrastive(b, b, 0.5).scalar(), 1e-12);
}

TEST(MineHardNegatives, HandExample) {
  const std::vector<int> labels{1, 0, 0, 0, 0};
  const std::vector<double> scores{0.9, 0.8, 0.1, 0.7, 0.2};
  const MinedSet m = mine_hard_negatives(scores, labels, 1, 1);
  EXPECT_EQ(m.positives, (std::vector<int>{0}));
  EXPECT_EQ(m.hard_negatives, (std::vector<int>{3}));
}

TEST(MineHardNegatives, DegenerateCases) {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.4};
  EXPECT_TRUE(mine_hard_negatives(s, std::vector<int>{1, 1, 1, 1}, 0, 2).hard_negatives.empty());
  EXPECT_TRUE(mine_hard_negatives(s, std::vector<int>{0, 1, 0, 0}, 4, 2).hard_negatives.empty());
  // top_k = -1 keeps as many as there are positives; ties go to the earlier index.
  const MinedSet m = mine_hard_negatives(std::vector<double>{0.5, 0.0, 0.5, 0.5, 0.2, 0.9},
                                         std::vector<int>{0, 1, 0, 0, 0, 1}, 0, -1);
  EXPECT_EQ(m.hard_negatives, (std::vector<int>{0, 2}));
  EXPECT_THROW(mine_hard_negatives(s, std::vector<int>{0, 1, 0, 0}, -1, 1), RangeError);
}

TEST(MineHardNegatives, NegativesNeverNearPositives) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 30));
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = uniform01(rng);
      y[static_cast<std::size_t>(i)] = uniform01(rng) < 0.3;
    }
    const int w = static_cast<int>(uniform_index(rng, 4));
    const MinedSet m = mine_hard_negatives(s, y, w, -1);
    EXPECT_LE(m.hard_negatives.size(), m.positives.size());
    for (int h : m.hard_negatives) {
      EXPECT_EQ(y[static_cast<std::size_t>(h)], 0);
      for (int p : m.positives) EXPECT_GT(std::abs(h - p), w);
    }
  }
}

TEST(IntraContrastive, EmptySetsGiveZero) {
  const ad::Var f = rows({{1, 0}, {0, 1}});
  const ad::Var t = rows({{1, 0}});
  ContrastiveSampleSets sets;
  sets.positive_frames = {0};
  sets.positive_sentences = {0};
  EXPECT_EQ(intra_contrastive(f, t, sets, 1.0).scalar(), 0.0);
}

TEST(IntraContrastive, OrthogonalNegativeByHand) {
  const ad::Var f = rows({{1, 0}, {0, 1}});
  const ad::Var t = rows({{1, 0}});
  ContrastiveSampleSets sets;
  sets.positive_frames = {0};
  sets.positive_sentences = {0};
  sets.hard_negative_frames = {1};
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(expected, 0.3133, 5e-5);
  EXPECT_NEAR(intra_contrastive(f, t, sets, 1.0).scalar(), expected, 1e-12);
}

TEST(IntraContrastive, BothTermsAdd) {
  const ad::Var f = rows({{1, 0}, {0, 1}});
  const ad::Var t = rows({{1, 0}, {0, 1}});
  ContrastiveSampleSets sets;
  sets.positive_frames = {0};
  sets.positive_sentences = {0};
  sets.hard_negative_frames = {1};
  sets.hard_negative_sentences = {1};
  const double one = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(intra_contrastive(f, t, sets, 1.0).scalar(), 2 * one, 1e-12);
  sets.hard_negative_frames = {5};
  EXPECT_THROW(intra_contrastive(f, t, sets, 1.0), RangeError);
}

TEST(TotalLoss, WeightedCombination) {
  LossParts parts;
  parts.cls_video = ad::scalar_constant(0.6);
  parts.cls_text = ad::scalar_constant(0.4);
  parts.mse = ad::scalar_constant(0.2);
  parts.inter = ad::scalar_constant(0.3);
  parts.intra = ad::scalar_constant(0.4);
  LossWeights w;
  w.alpha_mse = 1;
  w.beta = 0.1;
  w.lambda_intra = 1;
  const TotalLoss t = total_loss(parts, w, Mode::child);
  EXPECT_NEAR(t.total.scalar(), 1.63, 1e-12);
  EXPECT_NEAR(t.breakdown.total, 1.63, 1e-12);
  EXPECT_EQ(t.breakdown.inter, 0.3);
}

TEST(TotalLoss, ZeroWeightsLeaveClassification) {
  LossParts parts;
  parts.cls_video = ad::scalar_constant(0.7);
  parts.cls_text = ad::scalar_constant(0.2);
  parts.mse = ad::scalar_constant(5);
  parts.inter = ad::scalar_constant(5);
  parts.intra = ad::scalar_constant(5);
  LossWeights w;
  w.alpha_mse = w.beta = w.lambda_intra = 0;
  EXPECT_NEAR(total_loss(parts, w, Mode::child).total.scalar(), 0.9, 1e-15);
}

TEST(TotalLoss, ParentIgnoresTextTerms) {
  LossParts parts;
  parts.cls_video = ad::scalar_constant(0.7);
  parts.cls_text = ad::scalar_constant(5);
  parts.mse = ad::scalar_constant(0.1);
  parts.inter = ad::scalar_constant(1.0);
  parts.intra = ad::scalar_constant(3.0);
  LossWeights w;
  const double with_text = total_loss(parts, w, Mode::parent).total.scalar();
  parts.cls_text = ad::scalar_constant(0);
  EXPECT_EQ(total_loss(parts, w, Mode::parent).total.scalar(), with_text);
  EXPECT_NEAR(with_text, 0.7 + 0.1 + 0.1 * 1.0, 1e-15);
  w.parent_cls_only = true;
  EXPECT_NEAR(total_loss(parts, w, Mode::parent).total.scalar(), 0.7, 1e-15);
}

TEST(TotalLoss, UndefinedPartsSkippedAndValidation) {
  LossParts parts;
  parts.cls_video = ad::scalar_constant(0.5);
  LossWeights w;
  EXPECT_NEAR(total_loss(parts, w, Mode::child).total.scalar(), 0.5, 1e-15);
  w.beta = -1;
  EXPECT_THROW(total_loss(parts, w, Mode::child), ConfigError);
  EXPECT_THROW(w.validate(), ConfigError);
  LossParts empty;
  EXPECT_THROW(total_loss(empty, LossWeights{}, Mode::child), InvariantError);
}

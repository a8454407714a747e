#include <cmath>

#include <gtest/gtest.h>

#include "hsum/error.hpp"
#include "hsum/metrics.hpp"
#include "hsum/random.hpp"
#include "oracles/reference.hpp"

using namespace hsum;

namespace {

// Scores drawn from a small grid so ties occur often.
std::vector<double> tied_scores(Rng& rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(uniform_index(rng, static_cast<std::uint64_t>(levels))) / levels;
  return v;
}

std::vector<int> binary(Rng& rng, std::size_t n, double p) {
  std::vector<int> v(n);
  for (auto& x : v) x = uniform01(rng) < p;
  return v;
}

std::vector<std::string> random_sentences(Rng& rng, int count) {
  static const char* vocab[] = {"the", "cat", "sat", "on", "mat", "dog", "ran", "The", "CAT"};
  std::vector<std::string> out;
  for (int s = 0; s < count; ++s) {
    std::string line;
    const int len = static_cast<int>(uniform_index(rng, 6));
    for (int w = 0; w < len; ++w) {
      if (w) line += uniform01(rng) < 0.2 ? "  " : " ";
      line += vocab[uniform_index(rng, 9)];
    }
    out.push_back(line);
  }
  return out;
}

}  // namespace

TEST(F1, Examples) {
  const std::vector<int> a{1, 1, 0, 0}, b{1, 0, 1, 0};
  const PrecisionRecall pr = precision_recall_f1(a, b);
  EXPECT_DOUBLE_EQ(pr.precision, 0.5);
  EXPECT_DOUBLE_EQ(pr.recall, 0.5);
  EXPECT_DOUBLE_EQ(pr.f1, 0.5);
  EXPECT_EQ(f1_summary(a, a), 1.0);
  EXPECT_EQ(f1_summary(std::vector<int>{1, 0}, std::vector<int>{0, 1}), 0.0);
  EXPECT_EQ(f1_summary(std::vector<int>{0, 0}, std::vector<int>{0, 0}), 1.0);
  EXPECT_EQ(f1_summary(std::vector<int>{0, 0}, std::vector<int>{0, 1}), 0.0);
  EXPECT_THROW(f1_summary(std::vector<int>{0}, std::vector<int>{0, 1}), DimensionError);
}

TEST(F1, MultiAnnotatorAggregation) {
  const std::vector<int> pred{1, 1, 0, 0};
  const std::vector<std::vector<int>> gts{{1, 1, 0, 0}, {1, 0, 1, 0}};
  EXPECT_DOUBLE_EQ(f1_summary(pred, gts, F1Aggregate::mean), 0.75);
  EXPECT_DOUBLE_EQ(f1_summary(pred, gts, F1Aggregate::max), 1.0);
  EXPECT_EQ(parse_f1_aggregate("max"), F1Aggregate::max);
  EXPECT_THROW(parse_f1_aggregate("median"), ConfigError);
}

TEST(F1, SymmetricAndMatchesOracle) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 30);
    const auto p = binary(rng, n, 0.4), g = binary(rng, n, 0.4);
    EXPECT_NEAR(f1_summary(p, g), oracle::f1_naive(p, g), 1e-12);
    EXPECT_EQ(f1_summary(p, g), f1_summary(g, p));
  }
}

TEST(Correlation, Examples) {
  const std::vector<double> a{1, 2, 3}, b{1, 3, 2};
  EXPECT_NEAR(kendall_tau(a, b).value, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(spearman_rho(a, b).value, 0.5, 1e-15);
  EXPECT_NEAR(kendall_tau(a, a).value, 1.0, 1e-15);
  EXPECT_NEAR(spearman_rho(a, a).value, 1.0, 1e-15);
  const std::vector<double> r{3, 2, 1};
  EXPECT_NEAR(kendall_tau(a, r).value, -1.0, 1e-15);
  EXPECT_NEAR(spearman_rho(a, r).value, -1.0, 1e-15);
}

TEST(Correlation, ZeroVarianceIsUndefined) {
  const std::vector<double> a{1, 2, 3}, c{0.5, 0.5, 0.5};
  EXPECT_FALSE(kendall_tau(a, c).defined);
  EXPECT_FALSE(spearman_rho(c, a).defined);
  EXPECT_TRUE(kendall_tau(a, a).defined);
  EXPECT_THROW(kendall_tau(std::vector<double>{1}, std::vector<double>{1}), DimensionError);
}

TEST(Correlation, MatchesOracleWithTies) {
  Rng rng(2);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 40);
    const auto a = tied_scores(rng, n, 5), b = tied_scores(rng, n, 7);
    const double tn = oracle::kendall_naive(a, b);
    const Correlation tau = kendall_tau(a, b);
    if (std::isnan(tn)) {
      EXPECT_FALSE(tau.defined);
      continue;
    }
    ASSERT_TRUE(tau.defined);
    EXPECT_NEAR(tau.value, tn, 1e-12);
    EXPECT_NEAR(spearman_rho(a, b).value, oracle::spearman_naive(a, b), 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 80);
}

TEST(Correlation, InvariantUnderIncreasingTransforms) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 3 + uniform_index(rng, 20);
    const auto a = tied_scores(rng, n, 6), b = tied_scores(rng, n, 6);
    std::vector<double> fa(n), fb(n);
    for (std::size_t i = 0; i < n; ++i) {
      fa[i] = std::exp(3 * a[i]);
      fb[i] = b[i] * b[i] * b[i] + 2;
    }
    const auto t1 = kendall_tau(a, b), t2 = kendall_tau(fa, fb);
    ASSERT_EQ(t1.defined, t2.defined);
    if (!t1.defined) continue;
    EXPECT_NEAR(t1.value, t2.value, 1e-12);
    EXPECT_NEAR(spearman_rho(a, b).value, spearman_rho(fa, fb).value, 1e-12);
  }
}

TEST(Ranks, AverageTies) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 10, 5}),
            (std::vector<double>{2.5, 4, 2.5, 1}));
}

TEST(Map, Examples) {
  const std::vector<double> gt{0.1, 0.2, 0.3, 0.9};
  EXPECT_DOUBLE_EQ(map_at_rho(gt, gt, 0.5), 1.0);
  const std::vector<double> pred{0.9, 0.8, 0.7, 0.1};
  EXPECT_DOUBLE_EQ(map_at_rho(pred, gt, 0.25), 0.25);
  EXPECT_DOUBLE_EQ(map_at_rho(pred, gt, 1.0), 1.0);
  EXPECT_THROW(map_at_rho(std::vector<double>{}, std::vector<double>{}, 0.5), DimensionError);
  EXPECT_THROW(map_at_rho(pred, gt, 0.0), RangeError);
}

TEST(Map, AveragePrecisionByHand) {
  // Ranking 0,1,2,3 with relevant {1,3}: (1/2 + 2/4) / 2.
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{4, 3, 2, 1}, std::vector<int>{0, 1, 0, 1}),
                   0.5);
}

TEST(Map, MatchesOracleAndIsMonotoneInvariant) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 25);
    const auto p = tied_scores(rng, n, 6), g = tied_scores(rng, n, 6);
    for (double rho : {0.15, 0.5, 1.0}) {
      EXPECT_NEAR(map_at_rho(p, g, rho), oracle::map_naive(p, g, rho), 1e-12);
      std::vector<double> fp(n);
      for (std::size_t i = 0; i < n; ++i) fp[i] = 5 * p[i] + 1;
      EXPECT_NEAR(map_at_rho(p, g, rho), map_at_rho(fp, g, rho), 1e-12);
    }
  }
}

TEST(Rouge, Examples) {
  const std::vector<std::string> p{"the cat sat"}, g{"the cat ran"};
  const RougeScores r = rouge_scores(p, g);
  EXPECT_NEAR(r.rouge1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.rouge2, 0.5, 1e-15);
  EXPECT_NEAR(r.rougeL, 2.0 / 3.0, 1e-15);
  const RougeScores same = rouge_scores(g, g);
  EXPECT_EQ(same.rouge1, 1.0);
  EXPECT_EQ(same.rouge2, 1.0);
  EXPECT_EQ(same.rougeL, 1.0);
  const RougeScores none =
      rouge_scores(std::vector<std::string>{"a b"}, std::vector<std::string>{"c d"});
  EXPECT_EQ(none.rouge1, 0.0);
  EXPECT_EQ(none.rouge2, 0.0);
  EXPECT_EQ(none.rougeL, 0.0);
  EXPECT_THROW(rouge_scores(p, std::vector<std::string>{}), InvariantError);
}

TEST(Rouge, TokenizationLowercasesAndSplitsWhitespace) {
  EXPECT_EQ(rouge_tokenize("The  CAT\tsat\n"), (std::vector<std::string>{"the", "cat", "sat"}));
  const RougeScores r =
      rouge_scores(std::vector<std::string>{"THE cat", "sat"}, std::vector<std::string>{"the cat sat"});
  EXPECT_EQ(r.rouge1, 1.0);
  EXPECT_EQ(r.rouge2, 1.0);
}

TEST(Rouge, MatchesOracle) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_sentences(rng, 1 + static_cast<int>(uniform_index(rng, 3)));
    auto g = random_sentences(rng, 1 + static_cast<int>(uniform_index(rng, 3)));
    if (oracle::words(g).empty()) g.push_back("cat");
    const auto wp = oracle::words(p), wg = oracle::words(g);
    const RougeScores r = rouge_scores(p, g);
    EXPECT_NEAR(r.rouge1, oracle::rouge_n_naive(wp, wg, 1), 1e-12);
    EXPECT_NEAR(r.rouge2, oracle::rouge_n_naive(wp, wg, 2), 1e-12);
    EXPECT_NEAR(r.rougeL, oracle::rouge_l_naive(wp, wg), 1e-12);
  }
}

TEST(Cosine, Examples) {
  Matrix a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0.5, std::sqrt(3.0) / 2;
  Matrix gt(2, 2);
  gt << a, b;
  const CosineResult r = cosine_sim_metric(a, gt);
  EXPECT_TRUE(r.defined);
  EXPECT_NEAR(r.value, 0.75, 1e-15);
  EXPECT_NEAR(cosine_sim_metric(gt, gt).value, 1.0, 1e-15);
  Matrix o(1, 2);
  o << 0, 1;
  Matrix x(1, 2);
  x << 1, 0;
  EXPECT_EQ(cosine_sim_metric(o, x).value, 0.0);
}

TEST(Cosine, ZeroRowsSkippedWithFlag) {
  Matrix p(2, 2), g(2, 2);
  p << 0, 0, 1, 0;
  g << 1, 0, 0, 0;
  const CosineResult r = cosine_sim_metric(p, g);
  EXPECT_TRUE(r.defined);
  EXPECT_EQ(r.skipped_rows, 2);
  EXPECT_NEAR(r.value, 1.0, 1e-15);
  const CosineResult u = cosine_sim_metric(Matrix::Zero(1, 2), Matrix::Zero(1, 2));
  EXPECT_FALSE(u.defined);
  EXPECT_THROW(cosine_sim_metric(Matrix(0, 2), g), DimensionError);
}

TEST(Cosine, MatchesOracle) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    const Eigen::Index g = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    Matrix p(k, 4), q(g, 4);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = standard_normal(rng);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = standard_normal(rng);
    EXPECT_NEAR(cosine_sim_metric(p, q).value, oracle::cosine_naive(p, q), 1e-12);
  }
}

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsum/tensor_types.hpp"

namespace hsum {

enum class F1Aggregate { mean, max };
std::string_view to_string(F1Aggregate a);
F1Aggregate parse_f1_aggregate(std::string_view name);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// F1 is 1 when neither side has positives and 0 when exactly one side has.
PrecisionRecall precision_recall_f1(std::span<const int> pred, std::span<const int> gt);
double f1_summary(std::span<const int> pred, std::span<const int> gt);
double f1_summary(std::span<const int> pred, std::span<const std::vector<int>> gts,
                  F1Aggregate aggregate = F1Aggregate::mean);

// A correlation that may be undefined (zero variance in an input).
struct Correlation {
  double value = 0.0;
  bool defined = false;
};

// Tie-corrected Kendall tau-b, O(n log n).
Correlation kendall_tau(std::span<const double> a, std::span<const double> b);
// Pearson correlation of tie-averaged ranks.
Correlation spearman_rho(std::span<const double> a, std::span<const double> b);
// 1-based ranks, ties share the average rank.
std::vector<double> average_ranks(std::span<const double> x);

// Average precision of the ranking by `scores` (descending, ties to the
// earlier index) against binary relevance.
double average_precision(std::span<const double> scores, std::span<const int> relevant);

// Positives are the top max(1, floor(rho * n)) shots by ground-truth score.
double map_at_rho(std::span<const double> pred_shot_scores, std::span<const double> gt_shot_scores,
                  double rho);

struct RougeScores {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
};

std::vector<std::string> rouge_tokenize(std::string_view text);
// F-measures over the lowercased, whitespace-tokenized concatenation of each
// side. When neither side has any n-gram of an order, that order scores 1
// iff the token sequences are equal.
RougeScores rouge_scores(std::span<const std::string> pred_sentences,
                         std::span<const std::string> gt_sentences);

struct CosineResult {
  double value = 0.0;
  bool defined = false;
  int skipped_rows = 0;  // zero-norm rows ignored on either side
};

// Mean over ground-truth frames of the best cosine similarity to any
// predicted frame, each clamped at 0.
CosineResult cosine_sim_metric(const Matrix& pred_frames, const Matrix& gt_frames);

}  // namespace hsum

#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsum/alignment.hpp"
#include "hsum/autograd.hpp"

namespace hsum {

inline constexpr double kProbabilityClamp = 1e-7;

struct LossWeights {
  double alpha_mse = 1.0;
  double beta = 0.1;          // inter-sample contrastive
  double lambda_intra = 1.0;  // intra-sample contrastive
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double temperature = 0.07;
  // Restricts parent steps to the frame classification term only.
  bool parent_cls_only = false;

  void validate() const;  // throws ConfigError
};

// Index sets for the intra-sample contrastive term.
struct ContrastiveSampleSets {
  std::vector<int> positive_frames;
  std::vector<int> positive_sentences;
  std::vector<int> hard_negative_frames;
  std::vector<int> hard_negative_sentences;
};

// One modality's part of ContrastiveSampleSets.
struct MinedSet {
  std::vector<int> positives;
  std::vector<int> hard_negatives;
};

inline constexpr int kDefaultExclusionWindow = 2;

// Mean binary focal loss over all elements of `p` (any shape, values in
// (0, 1)). Probabilities are clamped to [1e-7, 1 - 1e-7].
ad::Var focal_loss(const ad::Var& p, std::span<const int> labels, double focal_alpha,
                   double focal_gamma);
double focal_loss(std::span<const double> p, std::span<const int> labels, double focal_alpha,
                  double focal_gamma);

ad::Var mse_replay_loss(const ad::Var& pred, std::span<const double> target);
double mse_replay_loss(std::span<const double> pred, std::span<const double> target);

// Symmetric InfoNCE over the B x B cosine matrix of [CLSV] vs [CLST] rows.
// Rows are renormalized (with a warning when they were not unit norm).
ad::Var inter_contrastive(const ad::Var& cls_video, const ad::Var& cls_text, double temperature);

// Candidates are label-0 indices farther than `exclusion_window` from every
// positive; the `top_k` highest scoring candidates are kept (ties to the
// earlier index). `top_k < 0` means "as many as there are positives".
MinedSet mine_hard_negatives(std::span<const double> scores, std::span<const int> labels,
                             int exclusion_window = kDefaultExclusionWindow, int top_k = -1);

// Frame anchors (positive frames) against the mean-pooled positive sentence
// embedding with hard-negative frames as negatives, plus the mirrored
// sentence term. Similarity is cosine; a term whose sets are empty is 0.
ad::Var intra_contrastive(const ad::Var& frame_tokens, const ad::Var& text_tokens,
                          const ContrastiveSampleSets& sets, double temperature);

struct LossParts {
  ad::Var cls_video;
  ad::Var cls_text;  // undefined when absent
  ad::Var mse;       // undefined when no replay scores
  ad::Var inter;     // undefined when not computed
  ad::Var intra;     // undefined when not computed
};

struct LossBreakdown {
  double total = 0.0;
  double cls_video = 0.0;
  double cls_text = 0.0;
  double mse = 0.0;
  double inter = 0.0;
  double intra = 0.0;
};

nlohmann::json to_json(const LossBreakdown& b);

struct TotalLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

// child:  cls_v + cls_t + alpha*mse + beta*inter + lambda*intra
// parent: cls_v + alpha*mse + beta*inter (or cls_v alone with parent_cls_only)
TotalLoss total_loss(const LossParts& parts, const LossWeights& weights, Mode mode);

}  // namespace hsum

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsum/metrics.hpp"
#include "hsum/network.hpp"
#include "hsum/summarizer.hpp"

namespace hsum {

struct EvalOptions {
  SummaryOptions summary;
  F1Aggregate f1_aggregate = F1Aggregate::mean;
  std::vector<double> map_rhos{0.5, 0.15};
  double replay_threshold = kDefaultReplayThreshold;

  void validate() const;
};

struct VideoMetrics {
  std::string video_id;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  Correlation tau;
  Correlation rho;
  std::vector<double> map;  // one per EvalOptions::map_rhos
  std::optional<RougeScores> rouge;
  std::optional<double> cosine;
  int selected_frames = 0;
};

struct EvalReport {
  std::string score_head;
  std::string summary_mode;
  std::string f1_aggregate;
  std::vector<double> map_rhos;
  std::vector<VideoMetrics> videos;

  // Means over videos; correlations and optional metrics average over the
  // videos where they are defined.
  double f1 = 0.0;
  double tau = 0.0;
  double rho = 0.0;
  int correlation_undefined = 0;
  std::vector<double> map;
  std::optional<RougeScores> rouge;
  std::optional<double> cosine;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Ground truth used by the metrics: binary frame labels per annotator and a
// per-frame importance score.
std::vector<std::vector<int>> ground_truth_labels(const VideoSample& sample, double replay_threshold);
std::vector<double> ground_truth_scores(const VideoSample& sample);

// Metrics for one video from predicted per-frame ranking scores, sentence
// scores and the resulting selection.
VideoMetrics evaluate_selection(const VideoSample& sample, const SummarySelection& selection,
                                const EvalOptions& options);

EvalReport aggregate(std::vector<VideoMetrics> videos, const EvalOptions& options);

// Child-mode inference over the samples.
EvalReport evaluate(const Model& model, std::span<const VideoSample> samples,
                    const EvalOptions& options);

}  // namespace hsum

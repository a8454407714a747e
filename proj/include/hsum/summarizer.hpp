#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hsum/network.hpp"
#include "hsum/segmentation.hpp"

namespace hsum {

enum class SummaryMode { knapsack, topk };
std::string_view to_string(SummaryMode mode);
SummaryMode parse_summary_mode(std::string_view name);

// Which model head ranks frames: the replay regressor or the frame
// classifier.
enum class ScoreHead { replay, classifier };
std::string_view to_string(ScoreHead head);
ScoreHead parse_score_head(std::string_view name);

struct SummaryOptions {
  SummaryMode mode = SummaryMode::knapsack;
  double budget_ratio = 0.15;
  double fraction = 0.55;
  double sentence_threshold = 0.5;
  int sentence_count = -1;  // >= 0 selects this many top sentences instead
  ScoreHead score_head = ScoreHead::replay;
  int max_change_points = -1;  // -1: N / 2
  double kts_penalty = kDefaultKtsPenalty;

  void validate() const;  // throws ConfigError
};

struct SummarySelection {
  SummaryMode mode = SummaryMode::knapsack;
  double budget_ratio = 0.0;
  std::vector<int> selected_frames;     // binary, N
  std::vector<int> selected_sentences;  // binary, M
  std::optional<ShotBoundaries> shots;  // knapsack mode
  std::vector<double> shot_scores;
  std::vector<int> selected_shots;      // binary, n_shots
  std::vector<double> frame_scores;
  std::vector<double> sentence_scores;
};

// Exact 0/1 knapsack. Among optimal selections, earlier shots are preferred:
// at the first index where two optimal selections differ, the one including
// that shot wins.
std::vector<int> knapsack_select(std::span<const double> shot_scores,
                                 std::span<const int> shot_lengths, int budget);

// Selects exactly floor(fraction * N) frames with the highest scores, ties
// to the earlier index.
std::vector<int> topk_select(std::span<const double> frame_scores, double fraction);

// Frame budget for knapsack selection: floor(budget_ratio * N).
int knapsack_budget(int n_frames, double budget_ratio);

// Selection from precomputed scores; `sample` supplies frame features (for
// KTS) and optional external shot boundaries.
SummarySelection summarize_scores(const VideoSample& sample, std::vector<double> frame_scores,
                                  std::vector<double> sentence_scores,
                                  const SummaryOptions& options);

// Child-mode forward followed by summarize_scores.
SummarySelection summarize_video(const Model& model, const VideoSample& sample,
                                 const SummaryOptions& options);

nlohmann::json to_json(const SummarySelection& s, const std::string& video_id);
// One line per frame: frame,score,selected.
std::string frame_scores_csv(const SummarySelection& s);

}  // namespace hsum

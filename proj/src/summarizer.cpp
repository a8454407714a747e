#include "hsum/summarizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hsum/error.hpp"

namespace hsum {

std::string_view to_string(SummaryMode mode) {
  return mode == SummaryMode::knapsack ? "knapsack" : "topk";
}

SummaryMode parse_summary_mode(std::string_view name) {
  if (name == "knapsack") return SummaryMode::knapsack;
  if (name == "topk") return SummaryMode::topk;
  throw ConfigError("unknown summary mode '" + std::string(name) + "' (knapsack|topk)");
}

std::string_view to_string(ScoreHead head) {
  return head == ScoreHead::replay ? "replay" : "classifier";
}

ScoreHead parse_score_head(std::string_view name) {
  if (name == "replay") return ScoreHead::replay;
  if (name == "classifier") return ScoreHead::classifier;
  throw ConfigError("unknown score head '" + std::string(name) + "' (replay|classifier)");
}

void SummaryOptions::validate() const {
  if (!(budget_ratio >= 0.0 && budget_ratio <= 1.0)) {
    throw ConfigError("budget_ratio must lie in [0, 1]");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("fraction must lie in (0, 1]");
  }
  if (sentence_count < -1) {
    throw ConfigError("sentence_count must be >= -1");
  }
  if (!(kts_penalty >= 0.0)) {
    throw ConfigError("kts_penalty must be >= 0");
  }
}

std::vector<int> knapsack_select(std::span<const double> scores, std::span<const int> lengths,
                                 int budget) {
  if (scores.size() != lengths.size()) {
    throw DimensionError("knapsack_select: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(lengths.size()) + " lengths");
  }
  if (budget < 0) {
    throw RangeError("knapsack_select: budget must be >= 0");
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] <= 0) {
      throw RangeError("knapsack_select: shot " + std::to_string(i) + " has non-positive length " +
                       std::to_string(lengths[i]));
    }
  }
  const std::size_t n = scores.size();
  const auto cap = static_cast<std::size_t>(budget);
  // best[i][c]: optimal value using shots i..n-1 within capacity c.
  std::vector<std::vector<double>> best(n + 1, std::vector<double>(cap + 1, 0.0));
  for (std::size_t i = n; i-- > 0;) {
    const auto len = static_cast<std::size_t>(lengths[i]);
    for (std::size_t c = 0; c <= cap; ++c) {
      double v = best[i + 1][c];
      if (len <= c) v = std::max(v, scores[i] + best[i + 1][c - len]);
      best[i][c] = v;
    }
  }
  std::vector<int> chosen(n, 0);
  std::size_t c = cap;
  for (std::size_t i = 0; i < n; ++i) {
    const auto len = static_cast<std::size_t>(lengths[i]);
    if (len <= c && scores[i] + best[i + 1][c - len] == best[i][c]) {
      chosen[i] = 1;
      c -= len;
    }
  }
  return chosen;
}

std::vector<int> topk_select(std::span<const double> scores, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw RangeError("topk_select: fraction must lie in (0, 1]");
  }
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> chosen(n, 0);
  for (std::size_t r = 0; r < std::min(k, n); ++r) chosen[order[r]] = 1;
  return chosen;
}

int knapsack_budget(int n_frames, double budget_ratio) {
  return static_cast<int>(std::floor(budget_ratio * n_frames + 1e-9));
}

SummarySelection summarize_scores(const VideoSample& sample, std::vector<double> frame_scores,
                                  std::vector<double> sentence_scores,
                                  const SummaryOptions& options) {
  options.validate();
  const int n = sample.num_frames();
  if (static_cast<int>(frame_scores.size()) != n) {
    throw DimensionError("summarize: " + std::to_string(frame_scores.size()) +
                         " frame scores for N = " + std::to_string(n));
  }
  SummarySelection s;
  s.mode = options.mode;
  s.budget_ratio = options.mode == SummaryMode::knapsack ? options.budget_ratio : options.fraction;
  if (options.mode == SummaryMode::topk) {
    s.selected_frames = topk_select(frame_scores, options.fraction);
  } else {
    ShotBoundaries shots;
    if (sample.shot_boundaries) {
      shots = make_shots(*sample.shot_boundaries, n);
    } else {
      const int max_cp = options.max_change_points >= 0 ? std::min(options.max_change_points, n - 1)
                                                         : n / 2;
      shots = kts_segment(sample.frame_features, max_cp, options.kts_penalty);
    }
    s.shot_scores = frame_to_shot_scores(frame_scores, shots);
    const std::vector<int> lengths = shots.lengths();
    s.selected_shots =
        knapsack_select(s.shot_scores, lengths, knapsack_budget(n, options.budget_ratio));
    s.selected_frames.assign(static_cast<std::size_t>(n), 0);
    for (int k = 0; k < shots.count(); ++k) {
      if (!s.selected_shots[static_cast<std::size_t>(k)]) continue;
      const auto [a, b] = shots.segment(k);
      for (int i = a; i < b; ++i) s.selected_frames[static_cast<std::size_t>(i)] = 1;
    }
    s.shots = std::move(shots);
  }

  const std::size_t m = sentence_scores.size();
  s.selected_sentences.assign(m, 0);
  if (options.sentence_count >= 0) {
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sentence_scores[a] > sentence_scores[b];
    });
    const auto k = std::min(m, static_cast<std::size_t>(options.sentence_count));
    for (std::size_t r = 0; r < k; ++r) s.selected_sentences[order[r]] = 1;
  } else {
    for (std::size_t j = 0; j < m; ++j) {
      s.selected_sentences[j] = sentence_scores[j] >= options.sentence_threshold ? 1 : 0;
    }
  }
  s.frame_scores = std::move(frame_scores);
  s.sentence_scores = std::move(sentence_scores);
  return s;
}

SummarySelection summarize_video(const Model& model, const VideoSample& sample,
                                 const SummaryOptions& options) {
  ModelOutputs out = model.forward(sample, Mode::child);
  std::vector<double> scores =
      options.score_head == ScoreHead::replay ? out.replay_pred : out.frame_scores;
  return summarize_scores(sample, std::move(scores), std::move(out.sentence_scores), options);
}

namespace {
std::vector<int> indices_of(const std::vector<int>& mask) {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}
}  // namespace

nlohmann::json to_json(const SummarySelection& s, const std::string& video_id) {
  nlohmann::json j;
  j["video_id"] = video_id;
  j["mode"] = std::string(to_string(s.mode));
  j["budget_ratio"] = s.budget_ratio;
  j["num_frames"] = s.selected_frames.size();
  j["selected_frames"] = indices_of(s.selected_frames);
  j["selected_sentences"] = indices_of(s.selected_sentences);
  j["frame_scores"] = s.frame_scores;
  j["sentence_scores"] = s.sentence_scores;
  if (s.shots) {
    nlohmann::json table = nlohmann::json::array();
    for (int k = 0; k < s.shots->count(); ++k) {
      const auto [a, b] = s.shots->segment(k);
      table.push_back({{"start", a},
                       {"end", b},
                       {"score", s.shot_scores[static_cast<std::size_t>(k)]},
                       {"selected", s.selected_shots[static_cast<std::size_t>(k)] != 0}});
    }
    j["shots"] = table;
  }
  return j;
}

std::string frame_scores_csv(const SummarySelection& s) {
  std::ostringstream out;
  out.precision(17);
  out << "frame,score,selected\n";
  for (std::size_t i = 0; i < s.frame_scores.size(); ++i) {
    out << i << ',' << s.frame_scores[i] << ',' << s.selected_frames[i] << '\n';
  }
  return out.str();
}

}  // namespace hsum

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsum/tensor_types.hpp"

namespace hsum {

// Default relevance cut-off: frames whose replay score reaches it are
// labelled important.
inline constexpr double kDefaultReplayThreshold = 0.15;

struct SubtitleSegment {
  RowVector text_feature;
  int start_frame = 0;
  int end_frame = 0;  // exclusive
  std::string text;   // optional raw text, used by ROUGE
};

// One video: per-frame features (one row per frame, 1 frame/s), aligned
// subtitles, optional video-level description feature and supervision.
struct VideoSample {
  std::string video_id;
  Matrix frame_features;  // N x D_v
  std::vector<SubtitleSegment> subtitles;
  std::optional<RowVector> global_feature;  // D_t
  std::string global_text;
  std::optional<std::vector<int>> frame_labels;
  std::optional<std::vector<int>> sentence_labels;
  std::optional<std::vector<double>> replay_scores;
  // Optional per-annotator labels / scores (TVSum-style multi-annotator).
  std::vector<std::vector<int>> annotator_labels;
  std::vector<std::vector<double>> annotator_scores;
  // Externally supplied shot starts; when present they override KTS.
  std::optional<std::vector<int>> shot_boundaries;

  int num_frames() const { return static_cast<int>(frame_features.rows()); }
  int num_subtitles() const { return static_cast<int>(subtitles.size()); }

  // Throws InvariantError / RangeError / DimensionError on the first violated
  // invariant. `require_supervision` additionally demands labels or scores.
  void validate(bool require_supervision = false) const;
};

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct ManifestEntry {
  std::string video_id;
  std::filesystem::path frames;     // HSUM array, N x D_v
  std::filesystem::path subtitles;  // HSUM array, M x D_t
  std::optional<std::filesystem::path> global_feature;  // HSUM array, 1 x D_t
  std::filesystem::path labels;     // per-video JSON
  std::optional<Split> split;
};

struct DatasetManifest {
  std::filesystem::path root;
  int video_dim = 0;
  int text_dim = 0;
  std::vector<ManifestEntry> entries;

  const ManifestEntry& entry(std::string_view video_id) const;
  bool contains(std::string_view video_id) const;
  std::vector<std::string> ids(Split split) const;
  std::vector<std::string> all_ids() const;
  std::size_t size() const { return entries.size(); }
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

// Parses and validates a manifest; relative paths resolve against the
// manifest's "root" (itself relative to the manifest file's directory).
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::vector<int> replay_to_labels(std::span<const double> scores,
                                  double threshold = kDefaultReplayThreshold);

VideoSample load_sample(const DatasetManifest& manifest, std::string_view video_id);

// Writes the arrays and the per-video JSON under `dir` and returns the
// manifest entry (paths relative to `dir`).
ManifestEntry write_sample(const VideoSample& sample, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic instructional videos.
//
// Each video is a sequence of steps. A step owns a latent vector; its frames
// are the latent plus Gaussian noise and it narrates one subtitle whose
// feature is a fixed linear map of the latent plus noise. A subset of steps is
// important: their frames get label 1 and a replay score in [0.5, 1], the rest
// get label 0 and a score in [0, 0.1]. The video-level description feature is
// the mapped mean of the important latents.
//
// With `step_pool > 0` step latents are drawn from a shared pool of that many
// step types and each video picks `steps_per_video` distinct types; with
// `task_count > 0` videos belong to tasks and importance depends on whether a
// step type is relevant to the video's task, so only the description says
// which steps matter.
struct SynthOptions {
  std::uint64_t seed = 0;
  int n_videos = 8;
  int steps_per_video = 4;
  int frames_per_step = 5;
  int video_dim = 32;
  int text_dim = 24;
  int important_steps = -1;  // -1: half of the steps, rounded down (≥ 1)
  double frame_noise = 0.15;
  double text_noise = 0.05;
  double latent_scale = 1.0;
  double score_jitter = 0.0;  // per-frame jitter added inside a step's band
  int step_pool = 0;
  int task_count = 0;
  int relevant_per_task = 0;  // step types relevant to each task (task mode)
  double val_fraction = 0.0;
  double test_fraction = 0.0;
};

DatasetManifest synth_generate(const SynthOptions& options, const std::filesystem::path& out_dir);

}  // namespace hsum

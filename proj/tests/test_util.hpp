#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "hsum/dataset.hpp"
#include "hsum/network.hpp"
#include "hsum/random.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("hsum_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline hsum::Matrix random_matrix(hsum::Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  hsum::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * hsum::standard_normal(rng);
  return m;
}

// A random, fully supervised sample with M subtitles covering consecutive
// spans of `frames_per_sub` frames (the last span may leave trailing frames
// uncovered when `uncovered_tail` > 0).
inline hsum::VideoSample random_sample(hsum::Rng& rng, int m, int frames_per_sub, int dv, int dt,
                                       int uncovered_tail = 0, const std::string& id = "s") {
  hsum::VideoSample s;
  s.video_id = id;
  const int n = m * frames_per_sub + uncovered_tail;
  s.frame_features = random_matrix(rng, n, dv, 0.5);
  std::vector<int> sent;
  for (int j = 0; j < m; ++j) {
    hsum::SubtitleSegment seg;
    seg.text_feature = random_matrix(rng, 1, dt, 0.5).row(0);
    seg.start_frame = j * frames_per_sub;
    seg.end_frame = (j + 1) * frames_per_sub;
    seg.text = "step " + std::to_string(j);
    s.subtitles.push_back(seg);
    sent.push_back(j % 2 == 0 ? 1 : 0);
  }
  s.global_feature = random_matrix(rng, 1, dt, 0.5).row(0);
  std::vector<double> replay(static_cast<std::size_t>(n));
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const bool imp = frames_per_sub > 0 && i < m * frames_per_sub && (i / frames_per_sub) % 2 == 0;
    replay[static_cast<std::size_t>(i)] = imp ? hsum::uniform(rng, 0.5, 1.0) : hsum::uniform(rng, 0.0, 0.1);
    labels[static_cast<std::size_t>(i)] = imp ? 1 : 0;
  }
  s.replay_scores = replay;
  s.frame_labels = labels;
  s.sentence_labels = sent;
  return s;
}

inline hsum::ModelConfig tiny_config(int d = 16, int dv = 8, int dt = 6) {
  hsum::ModelConfig c;
  c.model_dim = d;
  c.n_layers = 2;
  c.n_heads = 2;
  c.ffn_dim = 2 * d;
  c.dropout = 0.0;
  c.video_dim = dv;
  c.text_dim = dt;
  c.max_frames = 32;
  c.max_subtitles = 8;
  return c;
}

// Parameters that score a frame by its feature column 0: every layer is an
// identity (zero attention and FFN weights), embeddings other than the
// column-0 projection are zero, and both frame heads read that direction.
inline hsum::Model oracle_model(const hsum::ModelConfig& c) {
  auto t = hsum::Model::initialize(c, 0).tensors();
  for (auto& [name, m] : t) {
    if (name.find(".gamma") == std::string::npos) m.setZero();
  }
  t["embed.video_proj.weight"](0, 0) = 1.0;
  t["head.frame.weight"](0, 0) = 4.0;
  t["head.replay.weight"](0, 0) = 4.0;
  return hsum::Model(c, t);
}

// Writes each frame's label into feature column 0 so oracle_model recovers
// the ground truth.
inline void plant_labels(hsum::VideoSample& s, double strength = 1.0) {
  for (int i = 0; i < s.num_frames(); ++i) {
    s.frame_features(i, 0) = strength * (*s.frame_labels)[static_cast<std::size_t>(i)];
  }
}

}  // namespace testutil

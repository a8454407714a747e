#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsum/alignment.hpp"
#include "hsum/autograd.hpp"
#include "hsum/dataset.hpp"
#include "hsum/random.hpp"

namespace hsum {

struct ModelConfig {
  int model_dim = 128;
  int n_layers = 2;
  int n_heads = 4;
  int ffn_dim = 256;
  double dropout = 0.1;
  int video_dim = 0;
  int text_dim = 0;
  int max_frames = 512;
  int max_subtitles = 128;
  // Blocks intra-modality attention; only the single-layer isolation probe
  // uses this.
  bool cross_modal_only = false;

  void validate() const;  // throws ConfigError
  int head_dim() const { return model_dim / n_heads; }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

struct ModelOutputs {
  std::vector<double> frame_scores;     // N, in (0, 1)
  std::vector<double> sentence_scores;  // M (1 in parent mode)
  std::vector<double> replay_pred;      // N, in (0, 1)
  RowVector cls_video;                  // D, unit norm
  RowVector cls_text;                   // D, unit norm
  Matrix frame_embeddings;              // N x D, final encoder states
  Matrix text_embeddings;               // M x D
};

struct ForwardOptions {
  bool training = false;  // enables dropout
  Rng* rng = nullptr;     // required when training with dropout > 0
};

// Graph handles for one forward pass; the training loop builds losses on
// top of these.
struct ForwardGraph {
  FusedSequence sequence;
  ad::Var hidden;           // T x D after the final layer norm
  ad::Var frame_tokens;     // N x D
  ad::Var text_tokens;      // M' x D
  ad::Var frame_scores;     // N x 1
  ad::Var sentence_scores;  // M' x 1
  ad::Var replay_pred;      // N x 1
  ad::Var cls_video;        // 1 x D, L2-normalized
  ad::Var cls_text;         // 1 x D, L2-normalized
};

// Scaled dot-product attention restricted by an alignment mask.
Matrix attention_weights(const Matrix& queries, const Matrix& keys, const AlignmentMask& mask);
Matrix masked_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                        const AlignmentMask& mask);
ad::Var masked_attention(const ad::Var& queries, const ad::Var& keys, const ad::Var& values,
                         const Matrix& additive_mask);

// Shared model: per-modality projection, a pre-norm transformer encoder under
// the alignment mask, and frame / sentence / replay heads.
//
// Copies are deep, so a copied model trains independently.
class Model {
 public:
  Model() = default;
  Model(ModelConfig config, const std::map<std::string, Matrix>& tensors);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  // Truncated normal (sigma 0.02) for projections, embeddings and encoder
  // weights; unit gains and zero biases elsewhere. Values are float32-exact.
  static Model initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::map<std::string, ad::Var>& parameters() const { return params_; }
  const ad::Var& param(const std::string& name) const;
  std::map<std::string, Matrix> tensors() const;
  std::size_t parameter_count() const;
  void zero_grad();
  // Rounds every parameter to the nearest float32 value.
  void round_to_float32();

  EmbeddingParams embedding() const;

  ForwardGraph forward_graph(const VideoSample& sample, Mode mode,
                             const ForwardOptions& options = {}) const;
  // Evaluation-mode forward without graph recording.
  ModelOutputs forward(const VideoSample& sample, Mode mode) const;

 private:
  ad::Var encoder_layer(const ad::Var& x, int layer, const Matrix& additive_mask,
                        const ForwardOptions& options) const;

  ModelConfig config_;
  std::map<std::string, ad::Var> params_;
};

// Parameter group of a tensor name: everything before the last component,
// e.g. "head.sentence.weight" -> "head.sentence".
std::string parameter_group(const std::string& name);

}  // namespace hsum

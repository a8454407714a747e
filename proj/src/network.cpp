#include "hsum/network.hpp"

#include <cmath>
#include <string>

#include "hsum/error.hpp"

namespace hsum {
namespace {

constexpr double kInitStd = 0.02;

std::string layer_name(int layer, const char* rest) {
  return "layers." + std::to_string(layer) + "." + rest;
}

Matrix truncated(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = truncated_normal(rng, kInitStd);
  }
  return m;
}

std::vector<double> column(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.rows());
}

}  // namespace

void ModelConfig::validate() const {
  if (model_dim < 1 || n_layers < 1 || n_heads < 1 || ffn_dim < 1 || video_dim < 1 ||
      text_dim < 1 || max_frames < 1 || max_subtitles < 1) {
    throw ConfigError("model config: all dimensions must be >= 1");
  }
  if (model_dim % n_heads != 0) {
    throw ConfigError("model config: model_dim " + std::to_string(model_dim) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("model config: dropout must lie in [0, 1)");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"model_dim", c.model_dim},         {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},             {"ffn_dim", c.ffn_dim},
          {"dropout", c.dropout},             {"video_dim", c.video_dim},
          {"text_dim", c.text_dim},           {"max_frames", c.max_frames},
          {"max_subtitles", c.max_subtitles}, {"cross_modal_only", c.cross_modal_only}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    c.model_dim = doc.at("model_dim").get<int>();
    c.n_layers = doc.at("n_layers").get<int>();
    c.n_heads = doc.at("n_heads").get<int>();
    c.ffn_dim = doc.at("ffn_dim").get<int>();
    c.dropout = doc.at("dropout").get<double>();
    c.video_dim = doc.at("video_dim").get<int>();
    c.text_dim = doc.at("text_dim").get<int>();
    c.max_frames = doc.at("max_frames").get<int>();
    c.max_subtitles = doc.at("max_subtitles").get<int>();
    c.cross_modal_only = doc.value("cross_modal_only", false);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Matrix attention_weights(const Matrix& q, const Matrix& k, const AlignmentMask& mask) {
  if (q.rows() != mask.size() || k.rows() != mask.size() || q.cols() != k.cols()) {
    throw DimensionError("attention: query/key shapes do not match the mask");
  }
  ad::NoGradGuard guard;
  const double s = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return ad::masked_softmax_rows(ad::constant(q * k.transpose() * s), mask.additive()).value();
}

Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        const AlignmentMask& mask) {
  if (v.rows() != k.rows()) {
    throw DimensionError("attention: value rows differ from key rows");
  }
  return attention_weights(q, k, mask) * v;
}

ad::Var masked_attention(const ad::Var& q, const ad::Var& k, const ad::Var& v,
                         const Matrix& additive_mask) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || additive_mask.rows() != q.rows() ||
      additive_mask.cols() != k.rows()) {
    throw DimensionError("attention: shape mismatch");
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  ad::Var weights = ad::masked_softmax_rows(ad::scale(ad::matmul_nt(q, k), s), additive_mask);
  return ad::matmul(weights, v);
}

std::string parameter_group(const std::string& name) {
  const auto pos = name.rfind('.');
  return pos == std::string::npos ? name : name.substr(0, pos);
}

Model::Model(ModelConfig config, const std::map<std::string, Matrix>& tensors)
    : config_(config) {
  config_.validate();
  const Model reference = initialize(config_, 0);
  for (const auto& [name, var] : reference.params_) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw SchemaError("model: missing parameter '" + name + "'");
    }
    if (it->second.rows() != var.rows() || it->second.cols() != var.cols()) {
      throw DimensionError("model: parameter '" + name + "' has shape " +
                           std::to_string(it->second.rows()) + "x" +
                           std::to_string(it->second.cols()) + ", expected " +
                           std::to_string(var.rows()) + "x" + std::to_string(var.cols()));
    }
    params_.emplace(name, ad::parameter(it->second));
  }
  if (tensors.size() != params_.size()) {
    for (const auto& [name, m] : tensors) {
      if (!params_.contains(name)) {
        throw SchemaError("model: unexpected parameter '" + name + "'");
      }
    }
  }
}

Model::Model(const Model& other) : config_(other.config_) {
  for (const auto& [name, var] : other.params_) {
    params_.emplace(name, ad::parameter(var.value()));
  }
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model;
  model.config_ = config;
  Rng rng(seed);
  const int d = config.model_dim;
  auto add = [&](const std::string& name, Matrix value) {
    model.params_.emplace(name, ad::parameter(std::move(value)));
  };
  auto zeros = [](Eigen::Index r, Eigen::Index c) { return Matrix(Matrix::Zero(r, c)); };
  auto ones = [](Eigen::Index r, Eigen::Index c) { return Matrix(Matrix::Ones(r, c)); };

  add("embed.video_proj.weight", truncated(rng, config.video_dim, d));
  add("embed.video_proj.bias", zeros(1, d));
  add("embed.text_proj.weight", truncated(rng, config.text_dim, d));
  add("embed.text_proj.bias", zeros(1, d));
  add("embed.cls_video", truncated(rng, 1, d));
  add("embed.cls_text", truncated(rng, 1, d));
  add("embed.pos_video", truncated(rng, config.max_frames + 1, d));
  add("embed.pos_text", truncated(rng, config.max_subtitles + 1, d));
  add("embed.seg_start", truncated(rng, config.max_frames, d));
  add("embed.seg_end", truncated(rng, config.max_frames, d));
  for (int l = 0; l < config.n_layers; ++l) {
    add(layer_name(l, "ln1.gamma"), ones(1, d));
    add(layer_name(l, "ln1.beta"), zeros(1, d));
    for (const char* p : {"q", "k", "v", "o"}) {
      add(layer_name(l, ("attn." + std::string(p) + ".weight").c_str()), truncated(rng, d, d));
      add(layer_name(l, ("attn." + std::string(p) + ".bias").c_str()), zeros(1, d));
    }
    add(layer_name(l, "ln2.gamma"), ones(1, d));
    add(layer_name(l, "ln2.beta"), zeros(1, d));
    add(layer_name(l, "ffn.fc1.weight"), truncated(rng, d, config.ffn_dim));
    add(layer_name(l, "ffn.fc1.bias"), zeros(1, config.ffn_dim));
    add(layer_name(l, "ffn.fc2.weight"), truncated(rng, config.ffn_dim, d));
    add(layer_name(l, "ffn.fc2.bias"), zeros(1, d));
  }
  add("final_ln.gamma", ones(1, d));
  add("final_ln.beta", zeros(1, d));
  for (const char* head : {"frame", "sentence", "replay"}) {
    add("head." + std::string(head) + ".weight", truncated(rng, d, 1));
    add("head." + std::string(head) + ".bias", zeros(1, 1));
  }
  model.round_to_float32();
  return model;
}

const ad::Var& Model::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw NotFoundError("model: no parameter named '" + name + "'");
  }
  return it->second;
}

std::map<std::string, Matrix> Model::tensors() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, var] : params_) {
    out.emplace(name, var.value());
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, var] : params_) {
    n += static_cast<std::size_t>(var.value().size());
  }
  return n;
}

void Model::zero_grad() {
  for (auto& [name, var] : params_) {
    var.zero_grad();
  }
}

void Model::round_to_float32() {
  for (auto& [name, var] : params_) {
    Matrix& m = var.mutable_value();
    m = m.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
  }
}

EmbeddingParams Model::embedding() const {
  return {param("embed.video_proj.weight"), param("embed.video_proj.bias"),
          param("embed.text_proj.weight"),  param("embed.text_proj.bias"),
          param("embed.cls_video"),         param("embed.cls_text"),
          param("embed.pos_video"),         param("embed.pos_text"),
          param("embed.seg_start"),         param("embed.seg_end")};
}

ad::Var Model::encoder_layer(const ad::Var& x, int l, const Matrix& additive_mask,
                             const ForwardOptions& options) const {
  const double rate = options.training ? config_.dropout : 0.0;
  auto drop = [&](const ad::Var& v) {
    if (rate <= 0.0) return v;
    if (options.rng == nullptr) {
      throw ConfigError("forward: training with dropout requires an RNG");
    }
    return ad::dropout(v, rate, *options.rng);
  };
  auto p = [&](const char* rest) -> const ad::Var& { return param(layer_name(l, rest)); };

  ad::Var h = ad::layer_norm(x, p("ln1.gamma"), p("ln1.beta"));
  ad::Var q = ad::linear(h, p("attn.q.weight"), p("attn.q.bias"));
  ad::Var k = ad::linear(h, p("attn.k.weight"), p("attn.k.bias"));
  ad::Var v = ad::linear(h, p("attn.v.weight"), p("attn.v.bias"));
  const int hd = config_.head_dim();
  std::vector<ad::Var> heads;
  heads.reserve(static_cast<std::size_t>(config_.n_heads));
  for (int head = 0; head < config_.n_heads; ++head) {
    heads.push_back(masked_attention(ad::slice_cols(q, head * hd, hd),
                                     ad::slice_cols(k, head * hd, hd),
                                     ad::slice_cols(v, head * hd, hd), additive_mask));
  }
  ad::Var attn = ad::linear(ad::concat_cols(heads), p("attn.o.weight"), p("attn.o.bias"));
  ad::Var y = ad::add(x, drop(attn));

  ad::Var f = ad::layer_norm(y, p("ln2.gamma"), p("ln2.beta"));
  f = ad::gelu(ad::linear(f, p("ffn.fc1.weight"), p("ffn.fc1.bias")));
  f = ad::linear(f, p("ffn.fc2.weight"), p("ffn.fc2.bias"));
  return ad::add(y, drop(f));
}

ForwardGraph Model::forward_graph(const VideoSample& sample, Mode mode,
                                  const ForwardOptions& options) const {
  const MaskOptions mask_options{.intra_modal = !config_.cross_modal_only};
  ForwardGraph g;
  g.sequence = build_fused_sequence(sample, embedding(), mode, mask_options);
  const Matrix additive = g.sequence.mask.additive();
  const TokenLayout& layout = g.sequence.layout;

  ad::Var x = g.sequence.tokens;
  if (options.training && config_.dropout > 0.0) {
    if (options.rng == nullptr) {
      throw ConfigError("forward: training with dropout requires an RNG");
    }
    x = ad::dropout(x, config_.dropout, *options.rng);
  }
  for (int l = 0; l < config_.n_layers; ++l) {
    x = encoder_layer(x, l, additive, options);
  }
  g.hidden = ad::layer_norm(x, param("final_ln.gamma"), param("final_ln.beta"));
  g.frame_tokens = ad::slice_rows(g.hidden, layout.frame(0), layout.n_frames);
  g.text_tokens = ad::slice_rows(g.hidden, layout.text(0), layout.n_text);
  g.frame_scores = ad::sigmoid(
      ad::linear(g.frame_tokens, param("head.frame.weight"), param("head.frame.bias")));
  g.sentence_scores = ad::sigmoid(
      ad::linear(g.text_tokens, param("head.sentence.weight"), param("head.sentence.bias")));
  g.replay_pred = ad::sigmoid(
      ad::linear(g.frame_tokens, param("head.replay.weight"), param("head.replay.bias")));
  g.cls_video = ad::l2_normalize_rows(ad::slice_rows(g.hidden, layout.cls_video(), 1));
  g.cls_text = ad::l2_normalize_rows(ad::slice_rows(g.hidden, layout.cls_text(), 1));
  return g;
}

ModelOutputs Model::forward(const VideoSample& sample, Mode mode) const {
  ad::NoGradGuard guard;
  const ForwardGraph g = forward_graph(sample, mode);
  ModelOutputs out;
  out.frame_scores = column(g.frame_scores.value());
  out.sentence_scores = column(g.sentence_scores.value());
  out.replay_pred = column(g.replay_pred.value());
  out.cls_video = g.cls_video.value().row(0);
  out.cls_text = g.cls_text.value().row(0);
  out.frame_embeddings = g.frame_tokens.value();
  out.text_embeddings = g.text_tokens.value();
  return out;
}

}  // namespace hsum

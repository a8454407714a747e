#include "hsum/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "hsum/error.hpp"

namespace hsum {
namespace {

double clamp_p(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

double focal_term(double p, int y, double a, double g) {
  const double q = clamp_p(p);
  if (y == 1) return -a * std::pow(1.0 - q, g) * std::log(q);
  return -(1.0 - a) * std::pow(q, g) * std::log(1.0 - q);
}

// d focal_term / dp; zero where the clamp is active.
double focal_grad(double p, int y, double a, double g) {
  if (p <= kProbabilityClamp || p >= 1.0 - kProbabilityClamp) return 0.0;
  if (y == 1) {
    const double lead = g == 0.0 ? 0.0 : g * std::pow(1.0 - p, g - 1.0) * std::log(p);
    return a * (lead - std::pow(1.0 - p, g) / p);
  }
  const double lead = g == 0.0 ? 0.0 : g * std::pow(p, g - 1.0) * std::log(1.0 - p);
  return -(1.0 - a) * (lead - std::pow(p, g) / (1.0 - p));
}

void check_labels(std::size_t n, std::span<const int> labels, const char* op) {
  if (labels.size() != n) {
    throw DimensionError(std::string(op) + ": " + std::to_string(n) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw RangeError(std::string(op) + ": labels must be 0 or 1");
    }
  }
}

void check_indices(std::span<const int> idx, Eigen::Index n, const char* what) {
  for (int i : idx) {
    if (i < 0 || i >= n) {
      throw RangeError(std::string("intra_contrastive: ") + what + " index " + std::to_string(i) +
                       " out of range [0, " + std::to_string(n) + ")");
    }
  }
}

// InfoNCE with one pooled positive per anchor set.
ad::Var info_nce(const ad::Var& anchors_all, std::span<const int> anchors,
                 const ad::Var& positives_all, std::span<const int> positives,
                 std::span<const int> negatives, double temperature) {
  ad::Var a = ad::gather_rows(anchors_all, anchors);
  ad::Var pos = ad::l2_normalize_rows(ad::mean_rows(ad::gather_rows(positives_all, positives)));
  ad::Var neg = ad::gather_rows(anchors_all, negatives);
  const ad::Var cols[] = {ad::matmul_nt(a, pos), ad::matmul_nt(a, neg)};
  ad::Var logits = ad::scale(ad::concat_cols(cols), 1.0 / temperature);
  const std::vector<int> targets(anchors.size(), 0);
  return ad::softmax_cross_entropy(logits, targets);
}

}  // namespace

void LossWeights::validate() const {
  if (alpha_mse < 0 || beta < 0 || lambda_intra < 0 || focal_gamma < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (!(focal_alpha > 0.0 && focal_alpha < 1.0)) {
    throw ConfigError("focal_alpha must lie in (0, 1)");
  }
  if (!(temperature > 0.0)) {
    throw ConfigError("temperature must be > 0");
  }
}

ad::Var focal_loss(const ad::Var& p, std::span<const int> labels, double a, double g) {
  const auto n = static_cast<std::size_t>(p.value().size());
  check_labels(n, labels, "focal_loss");
  if (n == 0) {
    throw DimensionError("focal_loss: empty input");
  }
  std::vector<int> y(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += focal_term(p.value().data()[i], y[i], a, g);
  }
  Matrix value(1, 1);
  value(0, 0) = total / static_cast<double>(n);
  const ad::Var inputs[] = {p};
  return ad::custom_op(std::move(value), inputs, [y = std::move(y), a, g](ad::Node& out) {
    auto& in = out.inputs[0];
    if (!in->requires_grad) return;
    const double upstream = out.grad(0, 0) / static_cast<double>(y.size());
    Matrix& grad = in->grad_ref();
    for (std::size_t i = 0; i < y.size(); ++i) {
      grad.data()[i] += upstream * focal_grad(in->value.data()[i], y[i], a, g);
    }
  });
}

double focal_loss(std::span<const double> p, std::span<const int> labels, double a, double g) {
  check_labels(p.size(), labels, "focal_loss");
  if (p.empty()) {
    throw DimensionError("focal_loss: empty input");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    total += focal_term(p[i], labels[i], a, g);
  }
  return total / static_cast<double>(p.size());
}

ad::Var mse_replay_loss(const ad::Var& pred, std::span<const double> target) {
  const auto n = static_cast<std::size_t>(pred.value().size());
  if (n != target.size() || n == 0) {
    throw DimensionError("mse_replay_loss: " + std::to_string(n) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
  }
  std::vector<double> s(target.begin(), target.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.value().data()[i] - s[i];
    total += d * d;
  }
  Matrix value(1, 1);
  value(0, 0) = total / static_cast<double>(n);
  const ad::Var inputs[] = {pred};
  return ad::custom_op(std::move(value), inputs, [s = std::move(s)](ad::Node& out) {
    auto& in = out.inputs[0];
    if (!in->requires_grad) return;
    const double k = 2.0 * out.grad(0, 0) / static_cast<double>(s.size());
    Matrix& grad = in->grad_ref();
    for (std::size_t i = 0; i < s.size(); ++i) {
      grad.data()[i] += k * (in->value.data()[i] - s[i]);
    }
  });
}

double mse_replay_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw DimensionError("mse_replay_loss: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += (pred[i] - target[i]) * (pred[i] - target[i]);
  }
  return total / static_cast<double>(pred.size());
}

ad::Var inter_contrastive(const ad::Var& cls_video, const ad::Var& cls_text, double temperature) {
  if (cls_video.rows() != cls_text.rows() || cls_video.cols() != cls_text.cols() ||
      cls_video.rows() < 1) {
    throw DimensionError("inter_contrastive: expected two B x D matrices with B >= 1");
  }
  if (!(temperature > 0.0)) {
    throw ConfigError("inter_contrastive: temperature must be > 0");
  }
  for (const ad::Var* m : {&cls_video, &cls_text}) {
    const Eigen::VectorXd norms = m->value().rowwise().norm();
    if ((norms.array() - 1.0).abs().maxCoeff() > 1e-6) {
      spdlog::warn("inter_contrastive: rows are not unit norm, renormalizing");
      break;
    }
  }
  ad::Var v = ad::l2_normalize_rows(cls_video);
  ad::Var t = ad::l2_normalize_rows(cls_text);
  ad::Var logits = ad::scale(ad::matmul_nt(v, t), 1.0 / temperature);
  std::vector<int> diag(static_cast<std::size_t>(v.rows()));
  std::iota(diag.begin(), diag.end(), 0);
  ad::Var v2t = ad::softmax_cross_entropy(logits, diag);
  ad::Var t2v = ad::softmax_cross_entropy(ad::transpose(logits), diag);
  const double half[] = {0.5, 0.5};
  const ad::Var terms[] = {v2t, t2v};
  return ad::weighted_sum(half, terms);
}

MinedSet mine_hard_negatives(std::span<const double> scores, std::span<const int> labels,
                             int exclusion_window, int top_k) {
  check_labels(scores.size(), labels, "mine_hard_negatives");
  if (exclusion_window < 0) {
    throw RangeError("mine_hard_negatives: exclusion_window must be >= 0");
  }
  MinedSet out;
  const int n = static_cast<int>(scores.size());
  for (int i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] == 1) out.positives.push_back(i);
  }
  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] == 1) continue;
    const bool near = std::any_of(out.positives.begin(), out.positives.end(),
                                  [&](int p) { return std::abs(i - p) <= exclusion_window; });
    if (!near) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  const int k = top_k < 0 ? static_cast<int>(out.positives.size()) : top_k;
  if (static_cast<int>(candidates.size()) > k) {
    candidates.resize(static_cast<std::size_t>(k));
  }
  out.hard_negatives = std::move(candidates);
  return out;
}

ad::Var intra_contrastive(const ad::Var& frame_tokens, const ad::Var& text_tokens,
                          const ContrastiveSampleSets& sets, double temperature) {
  if (frame_tokens.cols() != text_tokens.cols()) {
    throw DimensionError("intra_contrastive: frame and text embeddings differ in width");
  }
  if (!(temperature > 0.0)) {
    throw ConfigError("intra_contrastive: temperature must be > 0");
  }
  check_indices(sets.positive_frames, frame_tokens.rows(), "positive frame");
  check_indices(sets.hard_negative_frames, frame_tokens.rows(), "hard-negative frame");
  check_indices(sets.positive_sentences, text_tokens.rows(), "positive sentence");
  check_indices(sets.hard_negative_sentences, text_tokens.rows(), "hard-negative sentence");

  const bool have_pairs = !sets.positive_frames.empty() && !sets.positive_sentences.empty();
  std::vector<ad::Var> terms;
  if (have_pairs && !sets.hard_negative_frames.empty()) {
    terms.push_back(info_nce(ad::l2_normalize_rows(frame_tokens), sets.positive_frames,
                             ad::l2_normalize_rows(text_tokens), sets.positive_sentences,
                             sets.hard_negative_frames, temperature));
  }
  if (have_pairs && !sets.hard_negative_sentences.empty()) {
    terms.push_back(info_nce(ad::l2_normalize_rows(text_tokens), sets.positive_sentences,
                             ad::l2_normalize_rows(frame_tokens), sets.positive_frames,
                             sets.hard_negative_sentences, temperature));
  }
  if (terms.empty()) {
    return ad::scalar_constant(0.0);
  }
  const std::vector<double> ones(terms.size(), 1.0);
  return ad::weighted_sum(ones, terms);
}

nlohmann::json to_json(const LossBreakdown& b) {
  return {{"total", b.total}, {"cls_video", b.cls_video}, {"cls_text", b.cls_text},
          {"mse", b.mse},     {"inter", b.inter},         {"intra", b.intra}};
}

TotalLoss total_loss(const LossParts& parts, const LossWeights& weights, Mode mode) {
  if (weights.alpha_mse < 0 || weights.beta < 0 || weights.lambda_intra < 0) {
    throw ConfigError("total_loss: weights must be >= 0");
  }
  if (!parts.cls_video.defined()) {
    throw InvariantError("total_loss: the frame classification term is required");
  }
  TotalLoss out;
  std::vector<double> coefs;
  std::vector<ad::Var> terms;
  auto add = [&](const ad::Var& term, double w, double& slot) {
    if (!term.defined()) return;
    slot = term.scalar();
    coefs.push_back(w);
    terms.push_back(term);
  };
  add(parts.cls_video, 1.0, out.breakdown.cls_video);
  const bool parent = mode == Mode::parent;
  if (!parent) {
    add(parts.cls_text, 1.0, out.breakdown.cls_text);
  }
  if (!(parent && weights.parent_cls_only)) {
    add(parts.mse, weights.alpha_mse, out.breakdown.mse);
    add(parts.inter, weights.beta, out.breakdown.inter);
  }
  if (!parent) {
    add(parts.intra, weights.lambda_intra, out.breakdown.intra);
  }
  out.total = ad::weighted_sum(coefs, terms);
  out.breakdown.total = out.total.scalar();
  return out;
}

}  // namespace hsum

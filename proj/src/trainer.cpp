#include "hsum/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <spdlog/spdlog.h>

#include "hsum/checkpoint.hpp"
#include "hsum/error.hpp"

namespace hsum {
namespace {

ad::Var mean_of(const std::vector<ad::Var>& terms) {
  if (terms.empty()) return {};
  const std::vector<double> w(terms.size(), 1.0 / static_cast<double>(terms.size()));
  return ad::weighted_sum(w, terms);
}

std::vector<double> column_values(const ad::Var& v) {
  return std::vector<double>(v.value().data(), v.value().data() + v.value().size());
}

std::string describe(const StepResult& r) {
  std::string ids;
  for (const auto& id : r.video_ids) ids += (ids.empty() ? "" : ",") + id;
  return "step " + std::to_string(r.batch_index) + " (" +
         (r.role == Mode::parent ? "parent" : "child") + ", videos " + ids +
         "): " + to_json(r.breakdown).dump();
}

}  // namespace

std::string_view to_string(Scheduler s) { return s == Scheduler::cosine ? "cosine" : "none"; }

Scheduler parse_scheduler(std::string_view name) {
  if (name == "cosine") return Scheduler::cosine;
  if (name == "none") return Scheduler::none;
  throw ConfigError("unknown scheduler '" + std::string(name) + "' (cosine|none)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a positive number");
  }
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
  if (global_step < 0) throw ConfigError("global_step must be >= 0");
  if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0)) {
    throw ConfigError("invalid Adam parameters");
  }
  if (frame_exclusion_window < 0 || sentence_exclusion_window < 0) {
    throw ConfigError("exclusion windows must be >= 0");
  }
  if (hard_negatives < -1) throw ConfigError("hard_negatives must be >= -1");
  if (!(replay_threshold >= 0.0 && replay_threshold <= 1.0)) {
    throw ConfigError("replay_threshold must lie in [0, 1]");
  }
  weights.validate();
  eval.validate();
}

Mode batch_role(std::int64_t batch_index, int global_step) {
  return global_step >= 1 && batch_index % global_step == 0 ? Mode::parent : Mode::child;
}

double lr_schedule(std::int64_t step, std::int64_t total_steps, double base_lr, int warmup_epochs,
                   std::int64_t steps_per_epoch) {
  if (step < 0 || step > total_steps) {
    throw RangeError("lr_schedule: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(total_steps) + "]");
  }
  const std::int64_t warmup = static_cast<std::int64_t>(warmup_epochs) * steps_per_epoch;
  if (warmup > 0 && step <= warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps <= warmup) return base_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double scheduled_lr(const TrainConfig& c, std::int64_t step, std::int64_t total_steps,
                    std::int64_t steps_per_epoch) {
  if (c.scheduler == Scheduler::cosine) {
    return lr_schedule(step, total_steps, c.learning_rate, c.warmup_epochs, steps_per_epoch);
  }
  const std::int64_t warmup = static_cast<std::int64_t>(c.warmup_epochs) * steps_per_epoch;
  if (warmup > 0 && step <= warmup) {
    return c.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return c.learning_rate;
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(Model& model, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, param] : model.parameters()) {
    ad::Var p = param;
    const Matrix g = p.grad();
    auto [mit, m_new] = m_.try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
    auto [vit, v_new] = v_.try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    Matrix& w = p.mutable_value();
    const Matrix update =
        (m.array() / c1) / ((v.array() / c2).sqrt() + eps_) + weight_decay_ * w.array();
    w -= lr * update;
  }
  model.round_to_float32();
}

std::vector<int> training_frame_labels(const VideoSample& sample, double replay_threshold) {
  if (sample.frame_labels) return *sample.frame_labels;
  if (sample.replay_scores) return replay_to_labels(*sample.replay_scores, replay_threshold);
  throw InvariantError("video '" + sample.video_id + "' has neither frame labels nor replay scores");
}

TotalLoss batch_loss(const Model& model, std::span<const VideoSample* const> used, Mode role,
                     const TrainConfig& config, Rng& dropout_rng) {
  const LossWeights& w = config.weights;
  const ForwardOptions fo{.training = true, .rng = &dropout_rng};
  std::vector<ad::Var> cls_v, cls_t, mse, intra, rows_v, rows_t;
  for (const VideoSample* s : used) {
    const ForwardGraph g = model.forward_graph(*s, role, fo);
    const std::vector<int> labels = training_frame_labels(*s, config.replay_threshold);
    cls_v.push_back(focal_loss(g.frame_scores, labels, w.focal_alpha, w.focal_gamma));
    if (s->replay_scores) {
      mse.push_back(mse_replay_loss(g.replay_pred, *s->replay_scores));
    }
    rows_v.push_back(g.cls_video);
    rows_t.push_back(g.cls_text);
    if (role == Mode::child && s->sentence_labels) {
      const auto& sl = *s->sentence_labels;
      cls_t.push_back(focal_loss(g.sentence_scores, sl, w.focal_alpha, w.focal_gamma));
      const MinedSet frames = mine_hard_negatives(column_values(g.frame_scores), labels,
                                                  config.frame_exclusion_window,
                                                  config.hard_negatives);
      const MinedSet sentences = mine_hard_negatives(column_values(g.sentence_scores), sl,
                                                     config.sentence_exclusion_window,
                                                     config.hard_negatives);
      const ContrastiveSampleSets sets{frames.positives, sentences.positives,
                                       frames.hard_negatives, sentences.hard_negatives};
      intra.push_back(intra_contrastive(g.frame_tokens, g.text_tokens, sets, w.temperature));
    }
  }
  LossParts parts;
  parts.cls_video = mean_of(cls_v);
  parts.cls_text = mean_of(cls_t);
  parts.mse = mean_of(mse);
  parts.intra = mean_of(intra);
  parts.inter = inter_contrastive(ad::concat_rows(rows_v), ad::concat_rows(rows_t), w.temperature);
  return total_loss(parts, w, role);
}

StepResult compute_gradients(Model& model, std::span<const VideoSample* const> batch, Mode role,
                             const TrainConfig& config, Rng& dropout_rng) {
  model.zero_grad();
  StepResult r;
  r.role = role;
  std::vector<const VideoSample*> used;
  for (const VideoSample* s : batch) {
    if (role == Mode::parent && !s->global_feature) {
      if (config.strict) {
        throw TrainingError("video '" + s->video_id +
                            "' has no description feature for a parent step");
      }
      spdlog::warn("skipping video '{}' in parent step: no description feature", s->video_id);
      ++r.skipped;
      continue;
    }
    used.push_back(s);
    r.video_ids.push_back(s->video_id);
  }
  if (used.empty()) return r;

  const TotalLoss total = batch_loss(model, used, role, config, dropout_rng);
  r.breakdown = total.breakdown;
  if (!std::isfinite(r.breakdown.total)) {
    throw TrainingError("non-finite loss at " + describe(r));
  }
  ad::backward(total.total);

  double sq = 0.0;
  std::map<std::string, double> group_sq;
  for (const auto& [name, p] : model.parameters()) {
    const double s2 = p.grad().squaredNorm();
    sq += s2;
    group_sq[parameter_group(name)] += s2;
  }
  for (const auto& [group, s2] : group_sq) r.group_grad_norms[group] = std::sqrt(s2);
  r.grad_norm = std::sqrt(sq);
  if (!std::isfinite(r.grad_norm)) {
    throw TrainingError("non-finite gradient at " + describe(r));
  }
  r.applied = true;
  return r;
}

StepResult train_step(Model& model, AdamW& optimizer, std::span<const VideoSample* const> batch,
                      Mode role, const TrainConfig& config, double lr, Rng& dropout_rng) {
  StepResult r = compute_gradients(model, batch, role, config, dropout_rng);
  r.lr = lr;
  if (!r.applied) return r;
  if (config.grad_clip > 0.0 && r.grad_norm > config.grad_clip) {
    const double k = config.grad_clip / r.grad_norm;
    for (const auto& [name, p] : model.parameters()) {
      if (p.node()->grad.size() != 0) p.node()->grad *= k;
    }
  }
  optimizer.step(model, lr);
  return r;
}

FitResult fit(std::span<const VideoSample> train, std::span<const VideoSample> val,
              const ModelConfig& model_config, const TrainConfig& config,
              const StepCallback& on_step) {
  config.validate();
  if (train.empty()) {
    throw InvariantError("fit: the training split is empty");
  }
  for (const auto& s : train) s.validate(true);

  FitResult result;
  Model model = Model::initialize(model_config, config.seed);
  AdamW optimizer(config);
  Rng order_rng(config.seed ^ 0x5DEECE66DULL);
  Rng dropout_rng(config.seed + 0x9E3779B97F4A7C15ULL);

  const auto n = static_cast<std::int64_t>(train.size());
  const std::int64_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::int64_t total = per_epoch * config.epochs;
  std::vector<std::size_t> order(train.size());
  double best_tau = -2.0;
  std::int64_t index = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, order_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    int n_mse = 0, n_loss = 0;
    for (std::int64_t k = 0; k < per_epoch; ++k) {
      ++index;
      std::vector<const VideoSample*> batch;
      for (std::int64_t i = k * config.batch_size; i < std::min(n, (k + 1) * config.batch_size); ++i) {
        batch.push_back(&train[order[static_cast<std::size_t>(i)]]);
      }
      const Mode role = batch_role(index, config.global_step);
      const double lr = scheduled_lr(config, index, total, per_epoch);
      StepResult r = train_step(model, optimizer, batch, role, config, lr, dropout_rng);
      r.batch_index = index;
      r.epoch = epoch;
      (role == Mode::parent ? result.parent_steps : result.child_steps) += 1;
      (role == Mode::parent ? rec.parent_steps : rec.child_steps) += 1;
      result.skipped_samples += r.skipped;
      if (r.applied) {
        rec.mean_loss += r.breakdown.total;
        ++n_loss;
        if (role == Mode::child) {
          rec.mean_mse += r.breakdown.mse;
          ++n_mse;
        }
      }
      if (on_step) on_step(index, r);
      result.steps.push_back(std::move(r));
    }
    if (n_loss > 0) rec.mean_loss /= n_loss;
    if (n_mse > 0) rec.mean_mse /= n_mse;
    if (!val.empty() && (config.validate_every_epoch || epoch == config.epochs)) {
      rec.val = evaluate(model, val, config.eval);
      const double f1 = rec.val->f1;
      const double tau = rec.val->tau;
      if (f1 > result.best_val_f1 || (f1 == result.best_val_f1 && tau > best_tau)) {
        result.best_val_f1 = f1;
        best_tau = tau;
        result.best_epoch = epoch;
        result.best = model;
      }
      spdlog::debug("epoch {} loss {:.5f} val f1 {:.4f} tau {:.4f}", epoch, rec.mean_loss, f1, tau);
    }
    result.epochs.push_back(std::move(rec));
  }
  result.last = std::move(model);
  if (result.best_epoch == 0) {
    result.best = result.last;
    result.best_epoch = config.epochs;
  }
  return result;
}

nlohmann::json step_json(const StepResult& s) {
  return {{"type", "step"},
          {"step", s.batch_index},
          {"epoch", s.epoch},
          {"role", s.role == Mode::parent ? "parent" : "child"},
          {"lr", s.lr},
          {"loss", to_json(s.breakdown)},
          {"videos", s.video_ids},
          {"skipped", s.skipped},
          {"applied", s.applied},
          {"grad_norm", s.grad_norm}};
}

nlohmann::json epoch_json(const EpochRecord& e) {
  nlohmann::json j = {{"type", "epoch"},        {"epoch", e.epoch},
                      {"mean_loss", e.mean_loss}, {"mean_mse", e.mean_mse},
                      {"parent_steps", e.parent_steps}, {"child_steps", e.child_steps}};
  if (e.val) {
    j["val"] = {{"f1", e.val->f1}, {"kendall_tau", e.val->tau}, {"spearman_rho", e.val->rho}};
  }
  return j;
}

FitResult fit(const DatasetManifest& manifest, const ModelConfig& model_config,
              const TrainConfig& config) {
  ModelConfig mc = model_config;
  if (mc.video_dim == 0) mc.video_dim = manifest.video_dim;
  if (mc.text_dim == 0) mc.text_dim = manifest.text_dim;
  if (mc.video_dim != manifest.video_dim || mc.text_dim != manifest.text_dim) {
    throw ConfigError("model input dims do not match the manifest dims");
  }
  std::vector<VideoSample> train, val;
  for (const auto& id : manifest.ids(Split::train)) train.push_back(load_sample(manifest, id));
  for (const auto& id : manifest.ids(Split::val)) val.push_back(load_sample(manifest, id));
  if (train.empty()) {
    throw InvariantError("fit: the manifest has no training videos");
  }

  FitResult result = fit(train, val, mc, config);
  if (!config.checkpoint_dir.empty()) {
    std::filesystem::create_directories(config.checkpoint_dir);
    const nlohmann::json meta_best = {{"kind", "best"},
                                      {"epoch", result.best_epoch},
                                      {"val_f1", result.best_val_f1}};
    const nlohmann::json meta_last = {{"kind", "last"}, {"epoch", config.epochs}};
    save_checkpoint(config.checkpoint_dir / "best.ckpt", result.best, meta_best);
    save_checkpoint(config.checkpoint_dir / "last.ckpt", result.last, meta_last);
    const auto history = config.checkpoint_dir / "history.jsonl";
    std::ofstream out(history, std::ios::trunc);
    if (!out) {
      throw FileError("cannot write '" + history.string() + "'");
    }
    std::size_t next = 0;
    for (const auto& e : result.epochs) {
      while (next < result.steps.size() && result.steps[next].epoch == e.epoch) {
        out << step_json(result.steps[next++]).dump() << '\n';
      }
      out << epoch_json(e).dump() << '\n';
    }
  }
  return result;
}

}  // namespace hsum

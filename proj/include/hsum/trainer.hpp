#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hsum/dataset.hpp"
#include "hsum/evaluation.hpp"
#include "hsum/losses.hpp"
#include "hsum/network.hpp"

namespace hsum {

enum class Scheduler { cosine, none };
std::string_view to_string(Scheduler s);
Scheduler parse_scheduler(std::string_view name);

struct TrainConfig {
  int batch_size = 2;
  int epochs = 100;
  double learning_rate = 1e-3;
  Scheduler scheduler = Scheduler::cosine;
  int warmup_epochs = 5;
  int global_step = 2;  // G: parent every G-th batch; 0 never, 1 always
  LossWeights weights;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty: nothing written

  double weight_decay = 1e-4;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int frame_exclusion_window = kDefaultExclusionWindow;
  int sentence_exclusion_window = 0;
  int hard_negatives = -1;  // per modality; -1: number of positives
  double replay_threshold = kDefaultReplayThreshold;
  bool strict = false;      // parent samples without a description are an error
  bool validate_every_epoch = true;
  EvalOptions eval;

  void validate() const;  // throws ConfigError
};

// Parent iff G >= 1 and batch_index is a multiple of G.
Mode batch_role(std::int64_t batch_index, int global_step);

// Linear warmup from 0 to base_lr over the warmup epochs, then cosine decay
// reaching 0 at total_steps. `step` is the 1-based batch index.
double lr_schedule(std::int64_t step, std::int64_t total_steps, double base_lr, int warmup_epochs,
                   std::int64_t steps_per_epoch);

// Learning rate actually used for a step under a given scheduler.
double scheduled_lr(const TrainConfig& config, std::int64_t step, std::int64_t total_steps,
                    std::int64_t steps_per_epoch);

class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay);
  explicit AdamW(const TrainConfig& c) : AdamW(c.adam_beta1, c.adam_beta2, c.adam_eps, c.weight_decay) {}

  // Applies gradients currently stored on the model's parameters; values are
  // rounded to float32 afterwards so checkpoints hold them exactly.
  void step(Model& model, double lr);
  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::int64_t t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

struct StepResult {
  std::int64_t batch_index = 0;
  int epoch = 0;
  Mode role = Mode::child;
  double lr = 0.0;
  LossBreakdown breakdown;
  std::vector<std::string> video_ids;  // samples that contributed
  int skipped = 0;                     // samples dropped (no description)
  bool applied = false;                // false when every sample was dropped
  double grad_norm = 0.0;              // before clipping
  std::map<std::string, double> group_grad_norms;
};

// Frame labels used for training: explicit labels, else thresholded replay
// scores.
std::vector<int> training_frame_labels(const VideoSample& sample, double replay_threshold);

// Batch loss for `role` over samples that are all valid for it (parent
// samples must carry a description feature). Terms are averaged over samples.
TotalLoss batch_loss(const Model& model, std::span<const VideoSample* const> batch, Mode role,
                     const TrainConfig& config, Rng& dropout_rng);

// Builds the batch loss for `role` and backpropagates it into the model's
// parameter gradients (zeroed first). No optimizer update.
StepResult compute_gradients(Model& model, std::span<const VideoSample* const> batch, Mode role,
                             const TrainConfig& config, Rng& dropout_rng);

// One optimizer step on total_loss(role).
StepResult train_step(Model& model, AdamW& optimizer, std::span<const VideoSample* const> batch,
                      Mode role, const TrainConfig& config, double lr, Rng& dropout_rng);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_mse = 0.0;
  int parent_steps = 0;
  int child_steps = 0;
  std::optional<EvalReport> val;
};

struct FitResult {
  Model best;
  Model last;
  int best_epoch = 0;
  double best_val_f1 = -1.0;
  std::vector<StepResult> steps;
  std::vector<EpochRecord> epochs;
  int parent_steps = 0;
  int child_steps = 0;
  int skipped_samples = 0;
};

using StepCallback = std::function<void(std::int64_t batch_index, const StepResult&)>;

FitResult fit(std::span<const VideoSample> train, std::span<const VideoSample> val,
              const ModelConfig& model_config, const TrainConfig& config,
              const StepCallback& on_step = {});

// Loads the train/val splits of a manifest, trains, and (when checkpoint_dir
// is set) writes best.ckpt, last.ckpt and history.jsonl there.
FitResult fit(const DatasetManifest& manifest, const ModelConfig& model_config,
              const TrainConfig& config);

nlohmann::json step_json(const StepResult& s);
nlohmann::json epoch_json(const EpochRecord& e);

}  // namespace hsum

#include "hsum/config.hpp"

#include <algorithm>
#include <fstream>

#include "hsum/error.hpp"

namespace hsum {
namespace {

using Json = nlohmann::json;

template <class T>
using Ref = std::function<T&(ExperimentConfig&)>;

template <class T>
std::function<Json(const ExperimentConfig&)> getter(Ref<T> ref) {
  return [ref](const ExperimentConfig& c) { return Json(ref(const_cast<ExperimentConfig&>(c))); };
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw ConfigError("config key '" + key + "' expects " + expected);
}

ConfigField integer(std::string key, std::string help, Ref<int> ref) {
  auto set = [key, ref](ExperimentConfig& c, const Json& v) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    const auto x = v.get<long long>();
    if (x < -2147483647LL || x > 2147483647LL) type_error(key, "a 32-bit integer");
    ref(c) = static_cast<int>(x);
  };
  return {key, FieldType::integer, help, set, getter(ref)};
}

ConfigField number(std::string key, std::string help, Ref<double> ref) {
  auto set = [key, ref](ExperimentConfig& c, const Json& v) {
    if (!v.is_number()) type_error(key, "a number");
    ref(c) = v.get<double>();
  };
  return {key, FieldType::number, help, set, getter(ref)};
}

ConfigField boolean(std::string key, std::string help, Ref<bool> ref) {
  auto set = [key, ref](ExperimentConfig& c, const Json& v) {
    if (!v.is_boolean()) type_error(key, "true or false");
    ref(c) = v.get<bool>();
  };
  return {key, FieldType::boolean, help, set, getter(ref)};
}

ConfigField path(std::string key, std::string help, Ref<std::filesystem::path> ref) {
  auto set = [key, ref](ExperimentConfig& c, const Json& v) {
    if (!v.is_string()) type_error(key, "a path string");
    ref(c) = v.get<std::string>();
  };
  auto get = [ref](const ExperimentConfig& c) {
    return Json(ref(const_cast<ExperimentConfig&>(c)).string());
  };
  return {key, FieldType::path, help, set, get};
}

template <class E>
ConfigField choice(std::string key, std::string help, Ref<E> ref, E (*parse)(std::string_view),
                   std::string_view (*name)(E)) {
  auto set = [key, ref, parse](ExperimentConfig& c, const Json& v) {
    if (!v.is_string()) type_error(key, "a string");
    ref(c) = parse(v.get<std::string>());
  };
  auto get = [ref, name](const ExperimentConfig& c) {
    return Json(std::string(name(ref(const_cast<ExperimentConfig&>(c)))));
  };
  return {key, FieldType::string, help, set, get};
}

std::vector<ConfigField> build_fields() {
  std::vector<ConfigField> f;
  // Paths.
  f.push_back(path("manifest", "dataset manifest (JSON)",
                   [](ExperimentConfig& c) -> auto& { return c.manifest; }));
  f.push_back(path("checkpoint_dir", "directory for checkpoints and history.jsonl",
                   [](ExperimentConfig& c) -> auto& { return c.checkpoint_dir; }));
  // Model.
  f.push_back(integer("model_dim", "common embedding dimension D",
                      [](ExperimentConfig& c) -> auto& { return c.model.model_dim; }));
  f.push_back(integer("n_layers", "encoder layers",
                      [](ExperimentConfig& c) -> auto& { return c.model.n_layers; }));
  f.push_back(integer("n_heads", "attention heads",
                      [](ExperimentConfig& c) -> auto& { return c.model.n_heads; }));
  f.push_back(integer("ffn_dim", "feed-forward width",
                      [](ExperimentConfig& c) -> auto& { return c.model.ffn_dim; }));
  f.push_back(number("dropout", "dropout rate during training",
                     [](ExperimentConfig& c) -> auto& { return c.model.dropout; }));
  f.push_back(integer("max_frames", "frame position table size",
                      [](ExperimentConfig& c) -> auto& { return c.model.max_frames; }));
  f.push_back(integer("max_subtitles", "subtitle position table size",
                      [](ExperimentConfig& c) -> auto& { return c.model.max_subtitles; }));
  // Training.
  f.push_back(integer("batch_size", "videos per batch",
                      [](ExperimentConfig& c) -> auto& { return c.train.batch_size; }));
  f.push_back(integer("epochs", "training epochs",
                      [](ExperimentConfig& c) -> auto& { return c.train.epochs; }));
  f.push_back(number("learning_rate", "base learning rate",
                     [](ExperimentConfig& c) -> auto& { return c.train.learning_rate; }));
  f.push_back(choice<Scheduler>("scheduler", "cosine|none",
                                [](ExperimentConfig& c) -> auto& { return c.train.scheduler; },
                                &parse_scheduler, &to_string));
  f.push_back(integer("warmup_epochs", "linear warmup length in epochs",
                      [](ExperimentConfig& c) -> auto& { return c.train.warmup_epochs; }));
  f.push_back(integer("global_step", "parent batch every G batches (0 never, 1 always)",
                      [](ExperimentConfig& c) -> auto& { return c.train.global_step; }));
  {
    auto set = [](ExperimentConfig& c, const Json& v) {
      if (!v.is_number_integer() || v.get<long long>() < 0) type_error("seed", "a non-negative integer");
      c.train.seed = v.get<std::uint64_t>();
    };
    auto get = [](const ExperimentConfig& c) { return Json(c.train.seed); };
    f.push_back({"seed", FieldType::integer, "random seed", set, get});
  }
  f.push_back(number("weight_decay", "decoupled weight decay",
                     [](ExperimentConfig& c) -> auto& { return c.train.weight_decay; }));
  f.push_back(number("grad_clip", "global gradient norm clip (<= 0 disables)",
                     [](ExperimentConfig& c) -> auto& { return c.train.grad_clip; }));
  f.push_back(number("alpha_mse", "weight of the replay MSE term",
                     [](ExperimentConfig& c) -> auto& { return c.train.weights.alpha_mse; }));
  f.push_back(number("beta", "weight of the inter-sample contrastive term",
                     [](ExperimentConfig& c) -> auto& { return c.train.weights.beta; }));
  f.push_back(number("lambda_intra", "weight of the intra-sample contrastive term",
                     [](ExperimentConfig& c) -> auto& { return c.train.weights.lambda_intra; }));
  f.push_back(number("focal_alpha", "focal loss class weight",
                     [](ExperimentConfig& c) -> auto& { return c.train.weights.focal_alpha; }));
  f.push_back(number("focal_gamma", "focal loss focusing exponent",
                     [](ExperimentConfig& c) -> auto& { return c.train.weights.focal_gamma; }));
  f.push_back(number("temperature", "contrastive softmax temperature",
                     [](ExperimentConfig& c) -> auto& { return c.train.weights.temperature; }));
  f.push_back(boolean("parent_cls_only", "parent steps use the frame classification term only",
                      [](ExperimentConfig& c) -> auto& { return c.train.weights.parent_cls_only; }));
  f.push_back(integer("frame_exclusion_window", "hard-negative frames keep this distance from positives",
                      [](ExperimentConfig& c) -> auto& { return c.train.frame_exclusion_window; }));
  f.push_back(integer("sentence_exclusion_window", "same for sentences",
                      [](ExperimentConfig& c) -> auto& { return c.train.sentence_exclusion_window; }));
  f.push_back(integer("hard_negatives", "hard negatives per modality (-1: number of positives)",
                      [](ExperimentConfig& c) -> auto& { return c.train.hard_negatives; }));
  {
    auto set = [](ExperimentConfig& c, const Json& v) {
      if (!v.is_number()) type_error("replay_threshold", "a number");
      c.train.replay_threshold = v.get<double>();
      c.train.eval.replay_threshold = c.train.replay_threshold;
    };
    auto get = [](const ExperimentConfig& c) { return Json(c.train.replay_threshold); };
    f.push_back({"replay_threshold", FieldType::number, "replay score cut-off for frame labels", set, get});
  }
  f.push_back(boolean("strict", "fail instead of skipping parent samples without a description",
                      [](ExperimentConfig& c) -> auto& { return c.train.strict; }));
  // Summaries and metrics.
  f.push_back(choice<SummaryMode>("mode", "summary selection: knapsack|topk",
                                  [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.mode; },
                                  &parse_summary_mode, &to_string));
  f.push_back(number("budget", "knapsack budget as a fraction of N",
                     [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.budget_ratio; }));
  f.push_back(number("fraction", "top-k fraction of frames",
                     [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.fraction; }));
  f.push_back(number("sentence_threshold", "sentence score cut-off",
                     [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.sentence_threshold; }));
  f.push_back(integer("sentence_count", "select this many sentences instead of thresholding (-1 off)",
                      [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.sentence_count; }));
  f.push_back(choice<ScoreHead>("score_head", "frame ranking head: replay|classifier",
                                [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.score_head; },
                                &parse_score_head, &to_string));
  f.push_back(integer("max_change_points", "KTS change point limit (-1: N/2)",
                      [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.max_change_points; }));
  f.push_back(number("kts_penalty", "KTS penalty coefficient",
                     [](ExperimentConfig& c) -> auto& { return c.train.eval.summary.kts_penalty; }));
  f.push_back(choice<F1Aggregate>("f1_aggregate", "multi-annotator F1: mean|max",
                                  [](ExperimentConfig& c) -> auto& { return c.train.eval.f1_aggregate; },
                                  &parse_f1_aggregate, &to_string));
  {
    auto set = [](ExperimentConfig& c, const Json& v) {
      std::vector<double> rhos;
      if (v.is_number()) {
        rhos.push_back(v.get<double>());
      } else if (v.is_array()) {
        for (const auto& x : v) {
          if (!x.is_number()) type_error("map_rho", "a list of numbers");
          rhos.push_back(x.get<double>());
        }
      } else {
        type_error("map_rho", "a list of numbers");
      }
      c.train.eval.map_rhos = std::move(rhos);
    };
    auto get = [](const ExperimentConfig& c) { return Json(c.train.eval.map_rhos); };
    f.push_back({"map_rho", FieldType::number_list, "MAP positive fractions", set, get});
  }
  return f;
}

}  // namespace

std::string ConfigField::flag() const {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

const ConfigField& config_field(const std::string& key) {
  for (const auto& f : config_fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_value(ExperimentConfig& config, const std::string& key, const Json& value) {
  config_field(key).set(config, value);
}

Json parse_flag_value(const ConfigField& field, const std::vector<std::string>& text) {
  auto one = [&]() -> const std::string& {
    if (text.size() != 1) {
      throw ConfigError(field.flag() + " expects exactly one value");
    }
    return text.front();
  };
  auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError(field.flag() + ": '" + s + "' is not a number");
    return v;
  };
  switch (field.type) {
    case FieldType::integer: {
      const std::string& s = one();
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != s.size() || s.empty()) throw ConfigError(field.flag() + ": '" + s + "' is not an integer");
      return Json(v);
    }
    case FieldType::number:
      return Json(to_double(one()));
    case FieldType::boolean: {
      const std::string& s = one();
      if (s == "true" || s == "1") return Json(true);
      if (s == "false" || s == "0") return Json(false);
      throw ConfigError(field.flag() + ": expected true or false, got '" + s + "'");
    }
    case FieldType::string:
    case FieldType::path:
      return Json(one());
    case FieldType::number_list: {
      Json arr = Json::array();
      for (const auto& s : text) arr.push_back(to_double(s));
      return arr;
    }
  }
  throw ConfigError("unsupported field type");
}

void ExperimentConfig::validate() const {
  // Input dims come from the manifest at training time.
  ModelConfig m = model;
  m.video_dim = std::max(m.video_dim, 1);
  m.text_dim = std::max(m.text_dim, 1);
  m.validate();
  train.validate();
}

ExperimentConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  ExperimentConfig c;
  for (const auto& [key, value] : doc.items()) {
    apply_config_value(c, key, value);
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) {
    throw FileError("cannot open config '" + p.string() + "'");
  }
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + p.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

Json to_json(const ExperimentConfig& config) {
  Json j = Json::object();
  for (const auto& f : config_fields()) j[f.key] = f.get(config);
  return j;
}

}  // namespace hsum

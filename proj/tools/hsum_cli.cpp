// Command-line entry point: synth | train | eval | summarize.
//
// Exit codes: 0 ok, 1 runtime error, 2 usage or validation error.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hsum/checkpoint.hpp"
#include "hsum/config.hpp"
#include "hsum/dataset.hpp"
#include "hsum/error.hpp"
#include "hsum/evaluation.hpp"
#include "hsum/summarizer.hpp"
#include "hsum/trainer.hpp"

namespace {

using hsum::ConfigError;
using hsum::ExperimentConfig;
namespace fs = std::filesystem;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> scalar;
  std::map<std::string, std::vector<std::string>> list;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "experiment config (JSON)");
    for (const auto& f : hsum::config_fields()) {
      CLI::Option* opt = nullptr;
      if (f.type == hsum::FieldType::number_list) {
        opt = app->add_option(f.flag(), list[f.key], f.help)->expected(1, -1);
      } else {
        opt = app->add_option(f.flag(), scalar[f.key], f.help);
      }
      options[f.key] = opt;
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config_path.empty()) c = hsum::load_experiment_config(config_path);
    for (const auto& f : hsum::config_fields()) {
      if (options.at(f.key)->count() == 0) continue;
      const std::vector<std::string> text = f.type == hsum::FieldType::number_list
                                                ? list.at(f.key)
                                                : std::vector<std::string>{scalar.at(f.key)};
      hsum::apply_config_value(c, f.key, hsum::parse_flag_value(f, text));
    }
    c.validate();
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw hsum::FileError("cannot write '" + path.string() + "'");
  out << text;
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::exists(path)) throw hsum::FileError(std::string(what) + " '" + path.string() + "' does not exist");
}

void emit_json(const nlohmann::json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_text(out_path, doc.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_st("hsum");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"Hierarchical multimodal video summarization"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  // synth
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic instructional-video dataset");
  hsum::SynthOptions so;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", so.seed, "random seed");
  synth->add_option("--videos", so.n_videos, "number of videos");
  synth->add_option("--steps", so.steps_per_video, "steps per video");
  synth->add_option("--frames-per-step", so.frames_per_step, "frames per step");
  synth->add_option("--video-dim", so.video_dim, "frame feature dimension");
  synth->add_option("--text-dim", so.text_dim, "text feature dimension");
  synth->add_option("--important-steps", so.important_steps, "important steps per video (-1: half)");
  synth->add_option("--frame-noise", so.frame_noise, "frame feature noise norm");
  synth->add_option("--text-noise", so.text_noise, "text feature noise norm");
  synth->add_option("--latent-scale", so.latent_scale, "step latent norm");
  synth->add_option("--score-jitter", so.score_jitter, "per-frame replay score jitter");
  synth->add_option("--step-pool", so.step_pool, "shared step types (0: fresh per video)");
  synth->add_option("--tasks", so.task_count, "tasks (0: importance independent of type)");
  synth->add_option("--relevant-per-task", so.relevant_per_task, "relevant step types per task");
  synth->add_option("--val-fraction", so.val_fraction, "fraction of videos in the val split");
  synth->add_option("--test-fraction", so.test_fraction, "fraction of videos in the test split");

  // train
  CLI::App* train = app.add_subcommand("train", "train a model");
  ConfigFlags train_flags;
  train_flags.attach(train);

  // eval
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  ConfigFlags eval_flags;
  eval_flags.attach(eval);
  std::string eval_ckpt, eval_split = "test", eval_out, eval_csv;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "train|val|test");
  eval->add_option("--out", eval_out, "report JSON path (default: stdout)");
  eval->add_option("--csv", eval_csv, "per-video metrics CSV path");

  // summarize
  CLI::App* summ = app.add_subcommand("summarize", "summarize one video");
  ConfigFlags summ_flags;
  summ_flags.attach(summ);
  std::string summ_ckpt, summ_video, summ_out, summ_csv;
  summ->add_option("--checkpoint", summ_ckpt, "checkpoint file")->required();
  summ->add_option("--video", summ_video, "video id")->required();
  summ->add_option("--out", summ_out, "summary JSON path (default: stdout)");
  summ->add_option("--csv", summ_csv, "per-frame score CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));

    if (synth->parsed()) {
      const hsum::DatasetManifest m = hsum::synth_generate(so, synth_out);
      std::cout << nlohmann::json{{"manifest", (fs::path(synth_out) / "manifest.json").string()},
                                  {"videos", m.size()},
                                  {"train", m.ids(hsum::Split::train).size()},
                                  {"val", m.ids(hsum::Split::val).size()},
                                  {"test", m.ids(hsum::Split::test).size()}}
                       .dump()
                << '\n';
      return 0;
    }

    if (train->parsed()) {
      ExperimentConfig c = train_flags.resolve();
      require_file(c.manifest, "manifest");
      if (c.checkpoint_dir.empty()) throw ConfigError("checkpoint_dir is required");
      const hsum::DatasetManifest manifest = hsum::load_manifest(c.manifest);
      c.train.checkpoint_dir = c.checkpoint_dir;
      const hsum::FitResult r = hsum::fit(manifest, c.model, c.train);
      std::cout << nlohmann::json{{"best_epoch", r.best_epoch},
                                  {"best_val_f1", r.best_val_f1},
                                  {"parent_steps", r.parent_steps},
                                  {"child_steps", r.child_steps},
                                  {"skipped_samples", r.skipped_samples},
                                  {"checkpoint_dir", c.checkpoint_dir.string()}}
                       .dump()
                << '\n';
      return 0;
    }

    if (eval->parsed()) {
      const ExperimentConfig c = eval_flags.resolve();
      require_file(eval_ckpt, "checkpoint");
      require_file(c.manifest, "manifest");
      const hsum::Model model = hsum::load_checkpoint(eval_ckpt);
      const hsum::DatasetManifest manifest = hsum::load_manifest(c.manifest);
      std::vector<hsum::VideoSample> samples;
      for (const auto& id : manifest.ids(hsum::parse_split(eval_split))) {
        samples.push_back(hsum::load_sample(manifest, id));
      }
      if (samples.empty()) throw hsum::InvariantError("split '" + eval_split + "' is empty");
      const hsum::EvalReport report = hsum::evaluate(model, samples, c.eval());
      nlohmann::json doc = report.to_json();
      doc["split"] = eval_split;
      emit_json(doc, eval_out);
      if (!eval_csv.empty()) write_text(eval_csv, report.to_csv());
      return 0;
    }

    if (summ->parsed()) {
      const ExperimentConfig c = summ_flags.resolve();
      require_file(summ_ckpt, "checkpoint");
      require_file(c.manifest, "manifest");
      const hsum::Model model = hsum::load_checkpoint(summ_ckpt);
      const hsum::DatasetManifest manifest = hsum::load_manifest(c.manifest);
      const hsum::VideoSample sample = hsum::load_sample(manifest, summ_video);
      const hsum::SummarySelection s = hsum::summarize_video(model, sample, c.eval().summary);
      emit_json(hsum::to_json(s, sample.video_id), summ_out);
      if (!summ_csv.empty()) write_text(summ_csv, hsum::frame_scores_csv(s));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

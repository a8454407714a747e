// Acceptance runner: one PASS/FAIL line per criterion. Criterion numbers
// given on the command line restrict the run to those criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <fmt/core.h>

#include "grad_suite.hpp"
#include "hsum/checkpoint.hpp"
#include "hsum/dataset.hpp"
#include "hsum/metrics.hpp"
#include "hsum/segmentation.hpp"
#include "hsum/summarizer.hpp"
#include "hsum/trainer.hpp"
#include "oracles/reference.hpp"
#include "test_util.hpp"

using namespace hsum;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<VideoSample> load_split(const DatasetManifest& m, Split split) {
  std::vector<VideoSample> out;
  for (const auto& id : m.ids(split)) out.push_back(load_sample(m, id));
  return out;
}

// 1. Finite-difference gradient suite.
Outcome gradients() {
  const auto t0 = Clock::now();
  const auto cases = gradsuite::run(2024, -1);
  const double secs = seconds_since(t0);
  bool ok = secs < 60.0;
  std::string detail;
  for (const auto& c : cases) {
    ok = ok && c.check.checked > 0 && c.check.worst_ratio <= 1.0;
    detail += fmt::format("{} {:.2e} ({} entries); ", c.name, c.check.worst_ratio, c.check.checked);
  }
  detail += fmt::format("worst error / tolerance shown, {:.1f}s", secs);
  return {ok, detail};
}

// 2. Single-layer cross-modal-only probe: a subtitle only reaches the frames
// it covers.
Outcome mask_isolation() {
  Rng rng(2);
  ModelConfig c;
  c.model_dim = 32;
  c.n_layers = 1;
  c.n_heads = 4;
  c.ffn_dim = 64;
  c.dropout = 0.0;
  c.video_dim = 12;
  c.text_dim = 10;
  c.max_frames = 64;
  c.max_subtitles = 16;
  c.cross_modal_only = true;
  double worst = 0.0;
  double aligned_min = 1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const Model model = Model::initialize(c, static_cast<std::uint64_t>(trial));
    const int m = 2 + static_cast<int>(uniform_index(rng, 5));
    const int per = 1 + static_cast<int>(uniform_index(rng, 5));
    const int tail = static_cast<int>(uniform_index(rng, 3));
    VideoSample s = testutil::random_sample(rng, m, per, c.video_dim, c.text_dim, tail);
    const int j = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));
    const ModelOutputs before = model.forward(s, Mode::child);
    s.subtitles[static_cast<std::size_t>(j)].text_feature +=
        testutil::random_matrix(rng, 1, c.text_dim, 5.0).row(0);
    const ModelOutputs after = model.forward(s, Mode::child);
    const auto& seg = s.subtitles[static_cast<std::size_t>(j)];
    for (int i = 0; i < s.num_frames(); ++i) {
      const double d = (after.frame_embeddings.row(i) - before.frame_embeddings.row(i)).norm();
      if (i >= seg.start_frame && i < seg.end_frame) {
        aligned_min = std::min(aligned_min, d);
      } else {
        worst = std::max(worst, d);
      }
    }
  }
  return {worst < 1e-5 && aligned_min > 1e-5,
          fmt::format("max non-aligned change {:.3e}; min aligned change {:.3e}", worst, aligned_min)};
}

// 3. Knapsack against exhaustive enumeration.
Outcome knapsack_oracle() {
  Rng rng(3);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 15));
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> l(static_cast<std::size_t>(n));
    int total = 0;
    for (int i = 0; i < n; ++i) {
      // Every fifth instance draws scores from a coarse grid to force ties.
      s[static_cast<std::size_t>(i)] =
          trial % 5 == 0 ? static_cast<double>(uniform_index(rng, 3)) : uniform01(rng);
      l[static_cast<std::size_t>(i)] = 1 + static_cast<int>(uniform_index(rng, 10));
      total += l[static_cast<std::size_t>(i)];
    }
    const int budget = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(total + 1)));
    if (knapsack_select(s, l, budget) != oracle::knapsack_brute(s, l, budget)) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} / 200 instances differ", mismatches)};
}

// 4. KTS: exact DP optimality and planted boundary recovery.
Outcome kts_oracle() {
  Rng rng(4);
  int dp_mismatch = 0, dp_cases = 0;
  for (int n = 2; n <= 20; ++n) {
    for (int rep = 0; rep < 3; ++rep) {
      Matrix x = testutil::random_matrix(rng, n, 3);
      const int cut = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - 1)));
      for (int i = cut; i < n; ++i) x.row(i) += RowVector::Constant(3, 1.5);
      const int max_m = std::min(3, n - 1);
      for (int m = 0; m <= max_m; ++m) {
        ++dp_cases;
        if (kts_fixed(x, m).change_points != oracle::kts_brute_fixed(x, m)) ++dp_mismatch;
      }
      ++dp_cases;
      if (kts_segment(x, max_m).change_points != oracle::kts_brute(x, max_m, kDefaultKtsPenalty)) ++dp_mismatch;
    }
  }
  testutil::TempDir dir("accept_kts");
  int recovered = 0;
  for (int seed = 0; seed < 100; ++seed) {
    SynthOptions o;
    o.seed = static_cast<std::uint64_t>(seed);
    o.n_videos = 1;
    o.steps_per_video = 3;
    o.frames_per_step = 10;
    const fs::path out = dir / std::to_string(seed);
    const DatasetManifest m = synth_generate(o, out);
    const VideoSample s = load_sample(m, m.all_ids().front());
    const ShotBoundaries b = kts_segment(s.frame_features, s.num_frames() / 2);
    bool ok = b.count() == 3;
    for (int k = 1; ok && k < 3; ++k) ok = std::abs(b.change_points[static_cast<std::size_t>(k)] - 10 * k) <= 1;
    recovered += ok;
    fs::remove_all(out);
  }
  return {dp_mismatch == 0 && recovered >= 95,
          fmt::format("DP vs brute force: {} / {} differ; boundaries recovered in {} / 100 seeds",
                      dp_mismatch, dp_cases, recovered)};
}

std::vector<double> tied_scores(Rng& rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(uniform_index(rng, static_cast<std::uint64_t>(levels))) / levels;
  return v;
}

std::vector<std::string> random_sentences(Rng& rng, int count) {
  static const char* vocab[] = {"the", "cat", "sat", "on", "mat", "dog", "ran", "The", "CAT"};
  std::vector<std::string> out;
  for (int s = 0; s < count; ++s) {
    std::string line;
    const int len = static_cast<int>(uniform_index(rng, 6));
    for (int w = 0; w < len; ++w) {
      if (w) line += " ";
      line += vocab[uniform_index(rng, 9)];
    }
    out.push_back(line);
  }
  return out;
}

// 5. Metrics against naive reference implementations and worked examples.
Outcome metric_oracles() {
  constexpr double tol = 1e-9;
  Rng rng(5);
  std::map<std::string, int> bad;
  auto check = [&](const char* name, bool ok) {
    bad[name] += ok ? 0 : 1;
  };
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 40);
    const auto a = tied_scores(rng, n, 5), b = tied_scores(rng, n, 7);
    const double tn = oracle::kendall_naive(a, b);
    const Correlation tau = kendall_tau(a, b);
    const Correlation rho = spearman_rho(a, b);
    if (std::isnan(tn)) {
      check("tau", !tau.defined);
      check("rho", !rho.defined);
    } else {
      check("tau", tau.defined && std::abs(tau.value - tn) <= tol);
      check("rho", rho.defined && std::abs(rho.value - oracle::spearman_naive(a, b)) <= tol);
    }
  }
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 30);
    std::vector<int> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = uniform01(rng) < 0.4;
      g[i] = uniform01(rng) < 0.4;
    }
    check("f1", std::abs(f1_summary(p, g) - oracle::f1_naive(p, g)) <= tol);
  }
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 25);
    const auto p = tied_scores(rng, n, 6), g = tied_scores(rng, n, 6);
    bool ok = true;
    for (double r : {0.15, 0.5}) ok = ok && std::abs(map_at_rho(p, g, r) - oracle::map_naive(p, g, r)) <= tol;
    check("map", ok);
  }
  for (int t = 0; t < 100; ++t) {
    const auto p = random_sentences(rng, 1 + static_cast<int>(uniform_index(rng, 3)));
    auto g = random_sentences(rng, 1 + static_cast<int>(uniform_index(rng, 3)));
    if (oracle::words(g).empty()) g.push_back("cat");
    const auto wp = oracle::words(p), wg = oracle::words(g);
    const RougeScores r = rouge_scores(p, g);
    check("rouge", std::abs(r.rouge1 - oracle::rouge_n_naive(wp, wg, 1)) <= tol &&
                       std::abs(r.rouge2 - oracle::rouge_n_naive(wp, wg, 2)) <= tol &&
                       std::abs(r.rougeL - oracle::rouge_l_naive(wp, wg)) <= tol);
  }
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    const Eigen::Index g = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    const Matrix p = testutil::random_matrix(rng, k, 4), q = testutil::random_matrix(rng, g, 4);
    check("cosine", std::abs(cosine_sim_metric(p, q).value - oracle::cosine_naive(p, q)) <= tol);
  }

  // Worked examples, exact up to rounding of the closed forms.
  const std::vector<double> x{1, 2, 3}, y{1, 3, 2};
  check("examples", std::abs(kendall_tau(x, y).value - 1.0 / 3.0) < 1e-15);
  check("examples", std::abs(spearman_rho(x, y).value - 0.5) < 1e-15);
  check("examples", f1_summary(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  check("examples", map_at_rho(std::vector<double>{0.9, 0.8, 0.7, 0.1},
                               std::vector<double>{0.1, 0.2, 0.3, 0.9}, 0.25) == 0.25);
  const RougeScores r = rouge_scores(std::vector<std::string>{"the cat sat"},
                                     std::vector<std::string>{"the cat ran"});
  check("examples", std::abs(r.rouge1 - 2.0 / 3.0) < 1e-15 && std::abs(r.rouge2 - 0.5) < 1e-15 &&
                        std::abs(r.rougeL - 2.0 / 3.0) < 1e-15);
  Matrix cp(1, 2), cg(2, 2);
  cp << 1, 0;
  cg << 1, 0, 0.5, std::sqrt(3.0) / 2;
  check("examples", std::abs(cosine_sim_metric(cp, cg).value - 0.75) < 1e-15);

  int total_bad = 0;
  std::string detail;
  for (const auto& [name, count] : bad) {
    total_bad += count;
    detail += fmt::format("{} {}; ", name, count);
  }
  return {total_bad == 0, detail + "(mismatches)"};
}

// 6. Recorded parent/child schedule over 100 batches.
Outcome schedule_invariant() {
  Rng rng(6);
  std::vector<VideoSample> samples;
  for (int v = 0; v < 2; ++v) samples.push_back(testutil::random_sample(rng, 3, 2, 8, 6, 0, "s" + std::to_string(v)));
  const ModelConfig mc = testutil::tiny_config();
  bool ok = true;
  std::string detail;
  for (int g : {0, 1, 2, 5, 10}) {
    TrainConfig c;
    c.batch_size = 2;
    c.epochs = 100;
    c.warmup_epochs = 5;
    c.global_step = g;
    c.seed = 1;
    const FitResult r = fit(samples, {}, mc, c);
    int expected = 0;
    for (int i = 1; i <= 100; ++i) expected += batch_role(i, g) == Mode::parent;
    int parents = 0, children = 0;
    double worst_sentence = 0.0;
    bool roles_ok = r.steps.size() == 100;
    for (const auto& s : r.steps) {
      roles_ok = roles_ok && s.role == batch_role(s.batch_index, g);
      if (s.role == Mode::parent) {
        ++parents;
        worst_sentence = std::max(worst_sentence, s.group_grad_norms.at("head.sentence"));
      } else {
        ++children;
      }
    }
    const bool gok = roles_ok && parents == expected && children == 100 - expected &&
                     r.parent_steps == parents && r.child_steps == children && worst_sentence == 0.0;
    ok = ok && gok;
    detail += fmt::format("G={}: {} parent / {} child (expected {}), max parent sentence-head grad {}; ",
                          g, parents, children, expected, worst_sentence);
  }
  return {ok, detail};
}

// 7. Overfit a small synthetic set with the short-video configuration.
Outcome overfit() {
  const auto t0 = Clock::now();
  testutil::TempDir dir("accept_overfit");
  SynthOptions so;
  so.seed = 7;
  so.n_videos = 8;
  so.steps_per_video = 4;
  so.frames_per_step = 5;
  const DatasetManifest m = synth_generate(so, dir.path());
  const std::vector<VideoSample> train = load_split(m, Split::train);

  ModelConfig mc;
  mc.video_dim = m.video_dim;
  mc.text_dim = m.text_dim;
  TrainConfig c;
  c.batch_size = 2;
  c.epochs = 200;
  c.learning_rate = 1e-3;
  c.scheduler = Scheduler::cosine;
  c.warmup_epochs = 5;
  c.global_step = 2;
  c.weights.beta = 0.1;
  c.weights.lambda_intra = 1.0;
  c.seed = 7;
  // Frames are selected at the true positive fraction; replay scores rank them.
  c.eval.summary.mode = SummaryMode::topk;
  c.eval.summary.fraction = 0.5;
  c.eval.summary.score_head = ScoreHead::replay;
  const FitResult r = fit(train, train, mc, c);
  const double secs = seconds_since(t0);

  int reached = -1;
  for (const auto& e : r.epochs) {
    if (e.val && e.val->f1 >= 0.95 && e.val->tau >= 0.8) {
      reached = e.epoch;
      break;
    }
  }
  // Epoch-level trend of the replay MSE: windowed means must fall and the
  // rank correlation with the epoch index must be strongly negative.
  std::vector<double> idx, mse;
  for (const auto& e : r.epochs) {
    idx.push_back(e.epoch);
    mse.push_back(e.mean_mse);
  }
  auto window_mean = [&](std::size_t from, std::size_t count) {
    double s = 0;
    for (std::size_t i = from; i < from + count; ++i) s += mse[i];
    return s / static_cast<double>(count);
  };
  const double head = window_mean(0, 10), tail = window_mean(mse.size() - 10, 10);
  const double trend = kendall_tau(idx, mse).value;
  const auto& last = *r.epochs.back().val;
  const bool ok = reached > 0 && secs < 600.0 && tail < head && trend < -0.5;
  return {ok, fmt::format("first epoch with F1>=0.95 and tau>=0.8: {}; final F1 {:.4f} tau {:.4f}; "
                          "MSE first/last 10 epochs {:.4g} / {:.4g}, epoch trend tau {:.3f}; {:.0f}s",
                          reached, last.f1, last.tau, head, tail, trend, secs)};
}

// 8. Hierarchy ablation: descriptions decide importance, so parent steps
// should raise validation tau.
struct AblationSetup {
  int videos = 64;
  int steps = 4;
  int frames_per_step = 5;
  int step_pool = 8;
  int tasks = 4;
  int relevant = 2;
  int epochs = 40;
  int batch_size = 4;
  int model_dim = 64;
};

double ablation_tau(const AblationSetup& a, int g, std::uint64_t seed, std::string* log) {
  testutil::TempDir dir("accept_ablation");
  SynthOptions so;
  so.seed = 100 + seed;
  so.n_videos = a.videos;
  so.steps_per_video = a.steps;
  so.frames_per_step = a.frames_per_step;
  so.step_pool = a.step_pool;
  so.task_count = a.tasks;
  so.relevant_per_task = a.relevant;
  so.score_jitter = 0.0;
  so.val_fraction = 0.25;
  const DatasetManifest m = synth_generate(so, dir.path());
  const auto train = load_split(m, Split::train);
  const auto val = load_split(m, Split::val);
  ModelConfig mc;
  mc.model_dim = a.model_dim;
  mc.n_heads = 4;
  mc.ffn_dim = 2 * a.model_dim;
  mc.video_dim = m.video_dim;
  mc.text_dim = m.text_dim;
  TrainConfig c;
  c.batch_size = a.batch_size;
  c.epochs = a.epochs;
  c.warmup_epochs = 2;
  c.global_step = g;
  c.seed = seed;
  c.validate_every_epoch = false;
  c.eval.summary.mode = SummaryMode::topk;
  c.eval.summary.fraction = 0.5;
  const FitResult r = fit(train, val, mc, c);
  const EvalReport rep = evaluate(r.last, val, c.eval);
  if (log) *log += fmt::format("G={} seed={}: val tau {:.4f} F1 {:.4f}; ", g, seed, rep.tau, rep.f1);
  return rep.tau;
}

Outcome hierarchy_ablation() {
  const AblationSetup a;
  std::string log;
  double with = 0, without = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    without += ablation_tau(a, 0, seed, &log) / 3.0;
    with += ablation_tau(a, 5, seed, &log) / 3.0;
  }
  return {with > without, log + fmt::format("mean val tau G=5 {:.4f} vs G=0 {:.4f}", with, without)};
}

// 9. Replay threshold boundary values.
Outcome threshold_contract() {
  const std::vector<double> s{0.15, std::nextafter(0.15, 0.0), std::nextafter(0.15, 1.0), 0.0, 1.0,
                              0.149, 0.151, static_cast<double>(0.15f)};
  const std::vector<int> expected{1, 0, 1, 0, 1, 0, 1, 1};
  const auto got = replay_to_labels(s);
  std::string detail;
  for (int v : got) detail += std::to_string(v);
  return {got == expected, "labels " + detail + " for 0.15, 0.15-ulp, 0.15+ulp, 0, 1, 0.149, 0.151, float(0.15)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + HSUM_CLI_PATH + "\" " + args + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 10. Two identical train invocations write identical bytes.
Outcome determinism() {
  testutil::TempDir dir("accept_determinism");
  const std::string data = (dir / "data").string();
  if (run_cli("synth --out \"" + data + "\" --seed 10 --videos 6 --val-fraction 0.34") != 0) {
    return {false, "synth failed"};
  }
  const std::string common = "train --manifest \"" + data + "/manifest.json\" --epochs 4 --batch-size 2"
                             " --model-dim 32 --n-heads 4 --ffn-dim 64 --dropout 0.1 --warmup-epochs 1 --seed 5";
  for (const char* run : {"a", "b"}) {
    if (run_cli(common + " --checkpoint-dir \"" + (dir / run).string() + "\"") != 0) {
      return {false, "train failed"};
    }
  }
  bool ok = true;
  std::string detail;
  for (const char* f : {"best.ckpt", "last.ckpt", "history.jsonl"}) {
    const std::string a = slurp(dir / "a" / f), b = slurp(dir / "b" / f);
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += fmt::format("{} {} bytes {}; ", f, a.size(), same ? "identical" : "DIFFER");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradients},
      {"mask isolation", mask_isolation},
      {"knapsack oracle", knapsack_oracle},
      {"KTS oracle", kts_oracle},
      {"metric oracles", metric_oracles},
      {"schedule invariant", schedule_invariant},
      {"overfit run", overfit},
      {"hierarchy ablation", hierarchy_ablation},
      {"threshold contract", threshold_contract},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    fmt::print("criterion {:>2} {:<20} {}  {}\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

#include "hsum/evaluation.hpp"

#include <cmath>
#include <sstream>

#include "hsum/dataset.hpp"
#include "hsum/error.hpp"

namespace hsum {
namespace {

ShotBoundaries eval_shots(const VideoSample& sample, const SummarySelection& selection,
                          const SummaryOptions& options) {
  if (selection.shots) return *selection.shots;
  const int n = sample.num_frames();
  if (sample.shot_boundaries) return make_shots(*sample.shot_boundaries, n);
  const int max_cp =
      options.max_change_points >= 0 ? std::min(options.max_change_points, n - 1) : n / 2;
  return kts_segment(sample.frame_features, max_cp, options.kts_penalty);
}

Matrix rows_where(const Matrix& m, const std::vector<int>& mask) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(static_cast<Eigen::Index>(i));
  }
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

nlohmann::json correlation_json(const Correlation& c) {
  return c.defined ? nlohmann::json(c.value) : nlohmann::json(nullptr);
}

}  // namespace

void EvalOptions::validate() const {
  summary.validate();
  for (double r : map_rhos) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw ConfigError("map_rho values must lie in (0, 1]");
    }
  }
  if (!(replay_threshold >= 0.0 && replay_threshold <= 1.0)) {
    throw ConfigError("replay_threshold must lie in [0, 1]");
  }
}

std::vector<std::vector<int>> ground_truth_labels(const VideoSample& sample,
                                                  double replay_threshold) {
  if (!sample.annotator_labels.empty()) return sample.annotator_labels;
  if (sample.frame_labels) return {*sample.frame_labels};
  if (sample.replay_scores) return {replay_to_labels(*sample.replay_scores, replay_threshold)};
  throw InvariantError("video '" + sample.video_id + "' has no frame supervision");
}

std::vector<double> ground_truth_scores(const VideoSample& sample) {
  const auto n = static_cast<std::size_t>(sample.num_frames());
  if (!sample.annotator_scores.empty()) {
    std::vector<double> mean(n, 0.0);
    for (const auto& a : sample.annotator_scores) {
      for (std::size_t i = 0; i < n; ++i) mean[i] += a[i];
    }
    for (double& v : mean) v /= static_cast<double>(sample.annotator_scores.size());
    return mean;
  }
  if (sample.replay_scores) return *sample.replay_scores;
  if (sample.frame_labels) {
    return std::vector<double>(sample.frame_labels->begin(), sample.frame_labels->end());
  }
  throw InvariantError("video '" + sample.video_id + "' has no frame supervision");
}

VideoMetrics evaluate_selection(const VideoSample& sample, const SummarySelection& selection,
                                const EvalOptions& options) {
  VideoMetrics vm;
  vm.video_id = sample.video_id;
  const auto gts = ground_truth_labels(sample, options.replay_threshold);
  vm.f1 = f1_summary(selection.selected_frames, gts, options.f1_aggregate);
  double p = 0.0, r = 0.0;
  for (const auto& gt : gts) {
    const auto pr = precision_recall_f1(selection.selected_frames, gt);
    p += pr.precision;
    r += pr.recall;
  }
  vm.precision = p / static_cast<double>(gts.size());
  vm.recall = r / static_cast<double>(gts.size());
  for (int x : selection.selected_frames) vm.selected_frames += x;

  const std::vector<double> gt_scores = ground_truth_scores(sample);
  if (sample.num_frames() >= 2) {
    vm.tau = kendall_tau(selection.frame_scores, gt_scores);
    vm.rho = spearman_rho(selection.frame_scores, gt_scores);
  }
  if (!options.map_rhos.empty()) {
    const ShotBoundaries shots = eval_shots(sample, selection, options.summary);
    const auto pred_shots = frame_to_shot_scores(selection.frame_scores, shots);
    const auto gt_shots = frame_to_shot_scores(gt_scores, shots);
    for (double rho : options.map_rhos) vm.map.push_back(map_at_rho(pred_shots, gt_shots, rho));
  }

  if (sample.sentence_labels &&
      selection.selected_sentences.size() == sample.subtitles.size()) {
    std::vector<std::string> pred, gt;
    bool has_text = false;
    for (std::size_t j = 0; j < sample.subtitles.size(); ++j) {
      const auto& text = sample.subtitles[j].text;
      has_text = has_text || !text.empty();
      if (selection.selected_sentences[j]) pred.push_back(text);
      if ((*sample.sentence_labels)[j]) gt.push_back(text);
    }
    if (has_text && !gt.empty() && !rouge_tokenize(gt.front()).empty()) {
      vm.rouge = rouge_scores(pred, gt);
    }
  }
  const Matrix pred_frames = rows_where(sample.frame_features, selection.selected_frames);
  const Matrix gt_frames = rows_where(sample.frame_features, gts.front());
  if (pred_frames.rows() > 0 && gt_frames.rows() > 0) {
    const CosineResult c = cosine_sim_metric(pred_frames, gt_frames);
    if (c.defined) vm.cosine = c.value;
  }
  return vm;
}

EvalReport aggregate(std::vector<VideoMetrics> videos, const EvalOptions& options) {
  EvalReport rep;
  rep.score_head = std::string(to_string(options.summary.score_head));
  rep.summary_mode = std::string(to_string(options.summary.mode));
  rep.f1_aggregate = std::string(to_string(options.f1_aggregate));
  rep.map_rhos = options.map_rhos;
  rep.map.assign(options.map_rhos.size(), 0.0);
  int n_corr = 0, n_rouge = 0, n_cos = 0;
  RougeScores rs;
  double cos = 0.0;
  for (const auto& v : videos) {
    rep.f1 += v.f1;
    if (v.tau.defined && v.rho.defined) {
      rep.tau += v.tau.value;
      rep.rho += v.rho.value;
      ++n_corr;
    } else {
      ++rep.correlation_undefined;
    }
    for (std::size_t k = 0; k < v.map.size() && k < rep.map.size(); ++k) rep.map[k] += v.map[k];
    if (v.rouge) {
      rs.rouge1 += v.rouge->rouge1;
      rs.rouge2 += v.rouge->rouge2;
      rs.rougeL += v.rouge->rougeL;
      ++n_rouge;
    }
    if (v.cosine) {
      cos += *v.cosine;
      ++n_cos;
    }
  }
  const auto n = static_cast<double>(videos.size());
  if (!videos.empty()) {
    rep.f1 /= n;
    for (double& m : rep.map) m /= n;
  }
  if (n_corr > 0) {
    rep.tau /= n_corr;
    rep.rho /= n_corr;
  }
  if (n_rouge > 0) {
    rs.rouge1 /= n_rouge;
    rs.rouge2 /= n_rouge;
    rs.rougeL /= n_rouge;
    rep.rouge = rs;
  }
  if (n_cos > 0) rep.cosine = cos / n_cos;
  rep.videos = std::move(videos);
  return rep;
}

EvalReport evaluate(const Model& model, std::span<const VideoSample> samples,
                    const EvalOptions& options) {
  options.validate();
  std::vector<VideoMetrics> videos;
  videos.reserve(samples.size());
  for (const auto& s : samples) {
    videos.push_back(evaluate_selection(s, summarize_video(model, s, options.summary), options));
  }
  return aggregate(std::move(videos), options);
}

namespace {
std::string rho_key(double rho) {
  std::ostringstream k;
  k << "map@" << rho;
  return k.str();
}
}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = {{"score_head", score_head},
                   {"summary_mode", summary_mode},
                   {"f1_aggregate", f1_aggregate},
                   {"map_rho", map_rhos}};
  nlohmann::json agg = {{"videos", videos.size()},
                        {"f1", f1},
                        {"kendall_tau", tau},
                        {"spearman_rho", rho},
                        {"correlation_undefined", correlation_undefined}};
  for (std::size_t k = 0; k < map.size(); ++k) agg[rho_key(map_rhos[k])] = map[k];
  if (rouge) agg["rouge"] = {{"r1", rouge->rouge1}, {"r2", rouge->rouge2}, {"rl", rouge->rougeL}};
  if (cosine) agg["cosine"] = *cosine;
  j["aggregate"] = agg;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : videos) {
    nlohmann::json e = {{"video_id", v.video_id},
                        {"f1", v.f1},
                        {"precision", v.precision},
                        {"recall", v.recall},
                        {"kendall_tau", correlation_json(v.tau)},
                        {"spearman_rho", correlation_json(v.rho)},
                        {"selected_frames", v.selected_frames}};
    for (std::size_t k = 0; k < v.map.size(); ++k) e[rho_key(map_rhos[k])] = v.map[k];
    if (v.rouge) e["rouge"] = {{"r1", v.rouge->rouge1}, {"r2", v.rouge->rouge2}, {"rl", v.rouge->rougeL}};
    if (v.cosine) e["cosine"] = *v.cosine;
    per.push_back(std::move(e));
  }
  j["videos"] = per;
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "video_id,f1,precision,recall,kendall_tau,spearman_rho";
  for (double r : map_rhos) out << ',' << rho_key(r);
  out << ",rouge1,rouge2,rougeL,cosine\n";
  auto opt = [&](bool has, double v) {
    out << ',';
    if (has) out << v;
  };
  for (const auto& v : videos) {
    out << v.video_id << ',' << v.f1 << ',' << v.precision << ',' << v.recall;
    opt(v.tau.defined, v.tau.value);
    opt(v.rho.defined, v.rho.value);
    for (double m : v.map) out << ',' << m;
    opt(v.rouge.has_value(), v.rouge ? v.rouge->rouge1 : 0.0);
    opt(v.rouge.has_value(), v.rouge ? v.rouge->rouge2 : 0.0);
    opt(v.rouge.has_value(), v.rouge ? v.rouge->rougeL : 0.0);
    opt(v.cosine.has_value(), v.cosine.value_or(0.0));
    out << '\n';
  }
  return out.str();
}

}  // namespace hsum

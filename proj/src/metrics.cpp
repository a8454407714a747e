#include "hsum/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "hsum/error.hpp"

namespace hsum {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pair(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": length mismatch " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}

std::int64_t pairs(std::int64_t t) { return t * (t - 1) / 2; }

// Counts inversions of `v` while merge-sorting it.
std::int64_t sort_count_inversions(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo,
                                   std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = sort_count_inversions(v, tmp, lo, mid) + sort_count_inversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted sequence.
template <class Eq>
std::int64_t tied_pairs(std::size_t n, Eq eq) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && eq(i - 1, i)) {
      ++run;
    } else {
      total += pairs(static_cast<std::int64_t>(run));
      run = 1;
    }
  }
  return total;
}

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& t, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++counts[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                      t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

double f_measure(double overlap, double n_pred, double n_gt) {
  if (overlap <= 0.0) return 0.0;
  const double p = overlap / n_pred;
  const double r = overlap / n_gt;
  return 2.0 * p * r / (p + r);
}

double rouge_n(const std::vector<std::string>& pred, const std::vector<std::string>& gt,
               std::size_t n) {
  const auto cp = ngram_counts(pred, n);
  const auto cg = ngram_counts(gt, n);
  const double np = pred.size() >= n ? static_cast<double>(pred.size() - n + 1) : 0.0;
  const double ng = gt.size() >= n ? static_cast<double>(gt.size() - n + 1) : 0.0;
  if (np == 0.0 && ng == 0.0) return pred == gt ? 1.0 : 0.0;
  double overlap = 0.0;
  for (const auto& [gram, c] : cp) {
    auto it = cg.find(gram);
    if (it != cg.end()) overlap += std::min(c, it->second);
  }
  return f_measure(overlap, np, ng);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::string_view to_string(F1Aggregate a) { return a == F1Aggregate::mean ? "mean" : "max"; }

F1Aggregate parse_f1_aggregate(std::string_view name) {
  if (name == "mean") return F1Aggregate::mean;
  if (name == "max") return F1Aggregate::max;
  throw ConfigError("unknown F1 aggregation '" + std::string(name) + "' (mean|max)");
}

PrecisionRecall precision_recall_f1(std::span<const int> pred, std::span<const int> gt) {
  check_pair(pred.size(), gt.size(), "f1");
  std::int64_t tp = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    tp += p && g;
    np += p;
    ng += g;
  }
  PrecisionRecall r;
  if (np == 0 && ng == 0) {
    r.precision = r.recall = r.f1 = 1.0;
    return r;
  }
  if (np == 0 || ng == 0) return r;
  r.precision = static_cast<double>(tp) / static_cast<double>(np);
  r.recall = static_cast<double>(tp) / static_cast<double>(ng);
  r.f1 = tp == 0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

double f1_summary(std::span<const int> pred, std::span<const int> gt) {
  return precision_recall_f1(pred, gt).f1;
}

double f1_summary(std::span<const int> pred, std::span<const std::vector<int>> gts,
                  F1Aggregate aggregate) {
  if (gts.empty()) {
    throw InvariantError("f1_summary: no ground-truth annotations");
  }
  double acc = aggregate == F1Aggregate::mean ? 0.0 : -1.0;
  for (const auto& gt : gts) {
    const double f = f1_summary(pred, gt);
    acc = aggregate == F1Aggregate::mean ? acc + f : std::max(acc, f);
  }
  return aggregate == F1Aggregate::mean ? acc / static_cast<double>(gts.size()) : acc;
}

Correlation kendall_tau(std::span<const double> a, std::span<const double> b) {
  check_pair(a.size(), b.size(), "kendall_tau");
  if (a.size() < 2) {
    throw DimensionError("kendall_tau: need at least 2 elements");
  }
  const std::size_t n = a.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });
  const std::int64_t n1 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]];
  });
  const std::int64_t n3 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]] && b[order[i]] == b[order[j]];
  });
  std::vector<double> bs(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) bs[i] = b[order[i]];
  const std::int64_t discordant = sort_count_inversions(bs, tmp, 0, n);
  const std::int64_t n2 = tied_pairs(n, [&](std::size_t i, std::size_t j) { return bs[i] == bs[j]; });
  const std::int64_t n0 = pairs(static_cast<std::int64_t>(n));
  const double denom = std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
  if (n0 == n1 || n0 == n2) return {kNaN, false};
  const double num = static_cast<double>(n0 - n1 - n2 + n3 - 2 * discordant);
  return {std::clamp(num / denom, -1.0, 1.0), true};
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman_rho(std::span<const double> a, std::span<const double> b) {
  check_pair(a.size(), b.size(), "spearman_rho");
  if (a.size() < 2) {
    throw DimensionError("spearman_rho: need at least 2 elements");
  }
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return {kNaN, false};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), true};
}

double average_precision(std::span<const double> scores, std::span<const int> relevant) {
  check_pair(scores.size(), relevant.size(), "average_precision");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
  double hits = 0.0, total = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (relevant[order[r]]) {
      hits += 1.0;
      total += hits / static_cast<double>(r + 1);
    }
  }
  return hits == 0.0 ? 0.0 : total / hits;
}

double map_at_rho(std::span<const double> pred, std::span<const double> gt, double rho) {
  check_pair(pred.size(), gt.size(), "map_at_rho");
  if (pred.empty()) {
    throw DimensionError("map_at_rho: no shots");
  }
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw RangeError("map_at_rho: rho must lie in (0, 1]");
  }
  const std::size_t n = gt.size();
  const std::size_t k =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rho * static_cast<double>(n) + 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return gt[i] > gt[j]; });
  std::vector<int> relevant(n, 0);
  for (std::size_t r = 0; r < std::min(k, n); ++r) relevant[order[r]] = 1;
  return average_precision(pred, relevant);
}

std::vector<std::string> rouge_tokenize(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream in(lower);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

RougeScores rouge_scores(std::span<const std::string> pred_sentences,
                         std::span<const std::string> gt_sentences) {
  if (gt_sentences.empty()) {
    throw InvariantError("rouge: empty reference summary");
  }
  std::vector<std::string> pred, gt;
  for (const auto& s : pred_sentences) {
    for (auto& t : rouge_tokenize(s)) pred.push_back(std::move(t));
  }
  for (const auto& s : gt_sentences) {
    for (auto& t : rouge_tokenize(s)) gt.push_back(std::move(t));
  }
  if (gt.empty()) {
    throw InvariantError("rouge: reference summary has no tokens");
  }
  RougeScores r;
  r.rouge1 = rouge_n(pred, gt, 1);
  r.rouge2 = rouge_n(pred, gt, 2);
  r.rougeL = pred.empty() ? 0.0
                          : f_measure(static_cast<double>(lcs_length(pred, gt)),
                                      static_cast<double>(pred.size()), static_cast<double>(gt.size()));
  return r;
}

CosineResult cosine_sim_metric(const Matrix& pred, const Matrix& gt) {
  if (pred.rows() < 1 || gt.rows() < 1) {
    throw DimensionError("cosine_sim_metric: need at least one predicted and one reference frame");
  }
  if (pred.cols() != gt.cols()) {
    throw DimensionError("cosine_sim_metric: feature widths differ");
  }
  CosineResult out;
  std::vector<Eigen::Index> valid_pred;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (pred.row(i).norm() > 0.0) {
      valid_pred.push_back(i);
    } else {
      ++out.skipped_rows;
    }
  }
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index g = 0; g < gt.rows(); ++g) {
    const double gn = gt.row(g).norm();
    if (gn == 0.0) {
      ++out.skipped_rows;
      continue;
    }
    double best = 0.0;
    for (Eigen::Index p : valid_pred) {
      best = std::max(best, gt.row(g).dot(pred.row(p)) / (gn * pred.row(p).norm()));
    }
    total += std::min(best, 1.0);
    ++counted;
  }
  if (counted == 0) {
    out.value = kNaN;
    return out;
  }
  out.value = total / counted;
  out.defined = true;
  return out;
}

}  // namespace hsum

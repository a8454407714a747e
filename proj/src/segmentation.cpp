#include "hsum/segmentation.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hsum/error.hpp"

namespace hsum {
namespace {

// Segment scatter from prefix sums of the Gram matrix:
//   scatter[a, b) = sum_i K_ii - (1 / (b - a)) * sum_{i,j} K_ij.
class ScatterTable {
 public:
  explicit ScatterTable(const Matrix& x) : n_(static_cast<int>(x.rows())) {
    const Matrix k = x * x.transpose();
    diag_.assign(static_cast<std::size_t>(n_) + 1, 0.0);
    for (int i = 0; i < n_; ++i) {
      diag_[static_cast<std::size_t>(i) + 1] = diag_[static_cast<std::size_t>(i)] + k(i, i);
    }
    block_ = Matrix::Zero(n_ + 1, n_ + 1);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        block_(i + 1, j + 1) = k(i, j) + block_(i, j + 1) + block_(i + 1, j) - block_(i, j);
      }
    }
    mean_diag_ = n_ > 0 ? diag_.back() / n_ : 0.0;
  }

  double operator()(int a, int b) const {
    const double d = diag_[static_cast<std::size_t>(b)] - diag_[static_cast<std::size_t>(a)];
    const double s = block_(b, b) - block_(a, b) - block_(b, a) + block_(a, a);
    return d - s / static_cast<double>(b - a);
  }

  double mean_diag() const { return mean_diag_; }

 private:
  int n_;
  std::vector<double> diag_;
  Matrix block_;
  double mean_diag_ = 0.0;
};

struct DpResult {
  std::vector<double> cost;                 // best scatter per change-point count
  std::vector<std::vector<int>> back;       // back[m][j]: last start for prefix j
};

DpResult run_dp(const ScatterTable& scatter, int n, int max_cp) {
  const double inf = std::numeric_limits<double>::infinity();
  DpResult r;
  std::vector<std::vector<double>> best(static_cast<std::size_t>(max_cp) + 1,
                                        std::vector<double>(static_cast<std::size_t>(n) + 1, inf));
  r.back.assign(static_cast<std::size_t>(max_cp) + 1,
                std::vector<int>(static_cast<std::size_t>(n) + 1, 0));
  for (int j = 1; j <= n; ++j) {
    best[0][static_cast<std::size_t>(j)] = scatter(0, j);
  }
  for (int m = 1; m <= max_cp; ++m) {
    auto& cur = best[static_cast<std::size_t>(m)];
    const auto& prev = best[static_cast<std::size_t>(m) - 1];
    for (int j = m + 1; j <= n; ++j) {
      for (int i = m; i < j; ++i) {
        const double c = prev[static_cast<std::size_t>(i)] + scatter(i, j);
        if (c < cur[static_cast<std::size_t>(j)]) {
          cur[static_cast<std::size_t>(j)] = c;
          r.back[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] = i;
        }
      }
    }
  }
  for (int m = 0; m <= max_cp; ++m) {
    r.cost.push_back(best[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)]);
  }
  return r;
}

ShotBoundaries backtrack(const DpResult& r, int n, int m) {
  std::vector<int> cps(static_cast<std::size_t>(m) + 1, 0);
  int j = n;
  for (int k = m; k >= 1; --k) {
    j = r.back[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    cps[static_cast<std::size_t>(k)] = j;
  }
  return make_shots(std::move(cps), n);
}

void check_input(const Matrix& features, int change_points) {
  if (features.rows() < 1) {
    throw InvariantError("kts: need at least one frame");
  }
  if (change_points < 0 || change_points >= features.rows()) {
    throw RangeError("kts: change point count " + std::to_string(change_points) +
                     " must lie in [0, N) with N = " + std::to_string(features.rows()));
  }
}

}  // namespace

std::pair<int, int> ShotBoundaries::segment(int k) const {
  if (k < 0 || k >= count()) {
    throw RangeError("shot index " + std::to_string(k) + " out of range");
  }
  const int end = k + 1 < count() ? change_points[static_cast<std::size_t>(k) + 1] : n_frames;
  return {change_points[static_cast<std::size_t>(k)], end};
}

std::vector<int> ShotBoundaries::lengths() const {
  std::vector<int> out;
  for (int k = 0; k < count(); ++k) {
    const auto [a, b] = segment(k);
    out.push_back(b - a);
  }
  return out;
}

void ShotBoundaries::validate() const {
  if (n_frames < 1) {
    throw InvariantError("shots: N must be >= 1");
  }
  if (change_points.empty() || change_points.front() != 0) {
    throw InvariantError("shots: first change point must be 0");
  }
  for (std::size_t k = 1; k < change_points.size(); ++k) {
    if (change_points[k] <= change_points[k - 1]) {
      throw InvariantError("shots: change points must be strictly increasing");
    }
  }
  if (change_points.back() >= n_frames) {
    throw RangeError("shots: change point " + std::to_string(change_points.back()) +
                     " out of range for N = " + std::to_string(n_frames));
  }
}

ShotBoundaries make_shots(std::vector<int> change_points, int n_frames) {
  ShotBoundaries s;
  s.change_points = std::move(change_points);
  s.n_frames = n_frames;
  s.validate();
  return s;
}

ShotBoundaries kts_segment(const Matrix& features, int max_change_points, double penalty) {
  check_input(features, max_change_points);
  if (!(penalty >= 0.0)) {
    throw RangeError("kts: penalty must be >= 0");
  }
  const int n = static_cast<int>(features.rows());
  const ScatterTable scatter(features);
  const DpResult r = run_dp(scatter, n, max_change_points);
  const double scale = penalty * scatter.mean_diag();
  int best_m = 0;
  double best = r.cost[0];
  for (int m = 1; m <= max_change_points; ++m) {
    const double obj =
        r.cost[static_cast<std::size_t>(m)] + scale * m * (std::log(static_cast<double>(n) / m) + 1.0);
    if (obj < best) {
      best = obj;
      best_m = m;
    }
  }
  return backtrack(r, n, best_m);
}

ShotBoundaries kts_fixed(const Matrix& features, int change_points) {
  check_input(features, change_points);
  const int n = static_cast<int>(features.rows());
  const DpResult r = run_dp(ScatterTable(features), n, change_points);
  return backtrack(r, n, change_points);
}

double segmentation_scatter(const Matrix& features, const ShotBoundaries& shots) {
  if (shots.n_frames != features.rows()) {
    throw DimensionError("segmentation_scatter: shots do not match the frame count");
  }
  double total = 0.0;
  for (int k = 0; k < shots.count(); ++k) {
    const auto [a, b] = shots.segment(k);
    const Matrix block = features.middleRows(a, b - a);
    const RowVector mean = block.colwise().mean();
    total += (block.rowwise() - mean).squaredNorm();
  }
  return total;
}

std::vector<double> frame_to_shot_scores(std::span<const double> frame_scores,
                                         const ShotBoundaries& shots) {
  shots.validate();
  if (static_cast<int>(frame_scores.size()) != shots.n_frames) {
    throw RangeError("frame_to_shot_scores: " + std::to_string(frame_scores.size()) +
                     " scores for shots over N = " + std::to_string(shots.n_frames));
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(shots.count()));
  for (int k = 0; k < shots.count(); ++k) {
    const auto [a, b] = shots.segment(k);
    double s = 0.0;
    for (int i = a; i < b; ++i) s += frame_scores[static_cast<std::size_t>(i)];
    out.push_back(s / (b - a));
  }
  return out;
}

}  // namespace hsum

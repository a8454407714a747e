#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hsum/tensor_types.hpp"

namespace hsum {

// Shot change points: segment start indices, first = 0. Segment k is
// [change_points[k], change_points[k+1]) with the last ending at n_frames.
struct ShotBoundaries {
  std::vector<int> change_points{0};
  int n_frames = 0;

  int count() const { return static_cast<int>(change_points.size()); }
  std::pair<int, int> segment(int k) const;
  std::vector<int> lengths() const;
  void validate() const;  // throws InvariantError / RangeError
};

ShotBoundaries make_shots(std::vector<int> change_points, int n_frames);

inline constexpr double kDefaultKtsPenalty = 1.0;

// Kernel temporal segmentation with the dot-product kernel. For each number
// of change points m, the minimum within-segment scatter is found by dynamic
// programming; m is then chosen to minimize
//   scatter(m) + penalty * mean(diag K) * m * (ln(N / m) + 1).
// The mean kernel diagonal makes the choice independent of feature scale.
// Ties prefer fewer change points.
ShotBoundaries kts_segment(const Matrix& features, int max_change_points,
                           double penalty = kDefaultKtsPenalty);

// Minimum scatter placement for exactly m change points (m + 1 segments).
ShotBoundaries kts_fixed(const Matrix& features, int change_points);

// Total within-segment scatter of a segmentation.
double segmentation_scatter(const Matrix& features, const ShotBoundaries& shots);

std::vector<double> frame_to_shot_scores(std::span<const double> frame_scores,
                                         const ShotBoundaries& shots);

}  // namespace hsum

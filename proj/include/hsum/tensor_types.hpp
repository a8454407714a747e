#pragma once

#include <Eigen/Dense>

namespace hsum {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

}  // namespace hsum

#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace glimg {

using Index = std::int64_t;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Row-major storage for operators that are read one row at a time when scoring.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace glimg

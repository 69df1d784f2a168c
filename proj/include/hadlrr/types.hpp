#pragma once

#include <Eigen/Dense>

namespace hadlrr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Spatial extent of a scene; pixel (row, col) maps to column row * cols + col.
struct ImageShape {
  Index rows = 0;
  Index cols = 0;

  Index pixels() const { return rows * cols; }
  bool operator==(const ImageShape&) const = default;
};

/// Observation matrix: bands x pixels, pixels in row-major raster order.
struct DataMatrix {
  Matrix values;
  ImageShape shape;

  Index bands() const { return values.rows(); }
  Index pixels() const { return values.cols(); }
};

}  // namespace hadlrr

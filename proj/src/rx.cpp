#include "hadlrr/rx.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "hadlrr/error.hpp"

namespace hadlrr {

namespace {

// Adds the relative ridge to cov and returns its Cholesky factor.
Eigen::LLT<Matrix> regularized_factor(Matrix cov, double ridge) {
  const Index b = cov.rows();
  if (ridge > 0) {
    const double tr = cov.trace();
    cov.diagonal().array() += tr > 0 ? ridge * tr / static_cast<double>(b) : ridge;
  }
  if (!cov.allFinite()) throw NumericalError("rx: background covariance is not finite");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success ||
      llt.rcond() < static_cast<double>(b) * std::numeric_limits<double>::epsilon())
    throw NumericalError(ridge > 0 ? "rx: background covariance is singular even with the ridge"
                                   : "rx: singular background covariance; apply a ridge");
  return llt;
}

double mahalanobis(const Eigen::LLT<Matrix>& llt, const Vector& diff) {
  return diff.dot(llt.solve(diff));
}

}  // namespace

Array global_rx_raw(const Matrix& x, std::optional<double> ridge) {
  const double r = ridge.value_or(kDefaultCovarianceRidge);
  if (!(r >= 0)) throw std::invalid_argument("global_rx: ridge must be >= 0");
  const Index m = x.cols();
  if (m == 0) return {};
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  Array scores = Array::Zero(m);
  if (centered.squaredNorm() == 0) return scores;
  const Matrix cov = centered * centered.transpose() / static_cast<double>(m);
  const auto llt = regularized_factor(cov, r);
  const Matrix whitened = llt.solve(centered);
  scores = centered.cwiseProduct(whitened).colwise().sum().transpose().array();
  return scores.max(0.0);
}

AnomalyScoreMap global_rx(const DataMatrix& x, std::optional<double> ridge) {
  return {x.shape, minmax_normalize(global_rx_raw(x.values, ridge))};
}

void LocalRxConfig::validate() const {
  if (w_in < 1 || w_in % 2 == 0) throw std::invalid_argument("local_rx: w_in must be odd and >= 1");
  if (w_out <= w_in || w_out % 2 == 0)
    throw std::invalid_argument("local_rx: w_out must be odd and larger than w_in");
  if (!(ridge >= 0)) throw std::invalid_argument("local_rx: ridge must be >= 0");
}

Array local_rx_raw(const HsiCube& cube, const LocalRxConfig& cfg) {
  cfg.validate();
  const Index B = cube.bands(), R = cube.rows(), C = cube.cols();
  const Index h_in = cfg.w_in / 2, h_out = cfg.w_out / 2;
  const Matrix x = cube_to_matrix(cube).values;

  Array scores(R * C);
  Matrix samples(B, cfg.w_out * cfg.w_out);
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      Index n = 0;
      for (Index rr = std::max<Index>(0, r - h_out); rr <= std::min(R - 1, r + h_out); ++rr)
        for (Index cc = std::max<Index>(0, c - h_out); cc <= std::min(C - 1, c + h_out); ++cc) {
          if (std::abs(rr - r) <= h_in && std::abs(cc - c) <= h_in) continue;
          samples.col(n++) = x.col(rr * C + cc);
        }
      if (n == 0)
        throw DataError("local_rx: image too small, pixel (" + std::to_string(r) + "," +
                        std::to_string(c) + ") has an empty background annulus");
      const auto annulus = samples.leftCols(n);
      const Vector mean = annulus.rowwise().mean();
      const Vector diff = x.col(r * C + c) - mean;
      if (diff.squaredNorm() == 0) {
        scores[r * C + c] = 0;
        continue;
      }
      const Matrix centered = annulus.colwise() - mean;
      const Matrix cov = centered * centered.transpose() / static_cast<double>(n);
      scores[r * C + c] = std::max(0.0, mahalanobis(regularized_factor(cov, cfg.ridge), diff));
    }
  }
  return scores;
}

AnomalyScoreMap local_rx(const HsiCube& cube, const LocalRxConfig& cfg) {
  return {cube.shape(), minmax_normalize(local_rx_raw(cube, cfg))};
}

}  // namespace hadlrr

#pragma once

#include <optional>

#include "hadlrr/evaluation.hpp"
#include "hadlrr/hsi_io.hpp"
#include "hadlrr/types.hpp"

namespace hadlrr {

/// Default relative covariance ridge: ridge * trace(Sigma) / B is added to
/// the diagonal (ridge itself when the trace is zero).
inline constexpr double kDefaultCovarianceRidge = 1e-6;

/// Squared Mahalanobis distance of every column of x to the column mean,
/// before normalisation. `ridge` = nullopt applies the default relative
/// ridge; an explicit 0 uses the raw covariance and throws NumericalError
/// if it is singular.
Array global_rx_raw(const Matrix& x, std::optional<double> ridge = std::nullopt);

AnomalyScoreMap global_rx(const DataMatrix& x, std::optional<double> ridge = std::nullopt);

struct LocalRxConfig {
  /// Guard window (odd). 1 means only the centre pixel is excluded.
  Index w_in = 3;
  /// Outer window (odd, > w_in). Windows are clipped at the image border.
  Index w_out = 7;
  double ridge = kDefaultCovarianceRidge;

  void validate() const;
};

/// Dual-window RX: mean and covariance from the clipped annulus between the
/// outer and guard windows around each pixel.
Array local_rx_raw(const HsiCube& cube, const LocalRxConfig& cfg);
AnomalyScoreMap local_rx(const HsiCube& cube, const LocalRxConfig& cfg);

}  // namespace hadlrr

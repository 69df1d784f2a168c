#pragma once

#include <filesystem>
#include <vector>

#include "hadlrr/hsi_io.hpp"
#include "hadlrr/types.hpp"

namespace hadlrr {

/// Per-pixel anomaly scores in [0,1], row-major over the image.
struct AnomalyScoreMap {
  ImageShape shape;
  Array scores;

  /// Throws DataError unless scores are finite, in [0,1] and sized to shape.
  void validate() const;
};

/// Min-max rescale to [0,1]; a constant input maps to all zeros.
Array minmax_normalize(const Array& raw);

/// Column l2 norms of a bands x pixels field.
Array column_norms(const Matrix& field);

struct RocPoint {
  double far = 0;  // false alarm rate
  double pd = 0;   // probability of detection
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0;
};

/// Threshold sweep over every distinct score, trapezoidal AUC. Ties between
/// an anomaly and a background pixel contribute half a pair.
RocCurve roc(const Array& scores, const GroundTruthMask& gt);
RocCurve roc(const AnomalyScoreMap& scores, const GroundTruthMask& gt);

/// Mann-Whitney estimate of P(score_anomaly > score_background), ties = 1/2,
/// computed from midranks. Independent of the ROC sweep.
double auc_pair_statistic(const Array& scores, const GroundTruthMask& gt);

double trapezoid_area(const std::vector<RocPoint>& points);

/// Normalised squared reconstruction error |X - R|^2 / |X|^2 (called MSE in
/// the HAD literature even though it is a relative error).
double metric_mse(const Matrix& x, const Matrix& recon);

/// |R_S - R_gt|^2 / |R_gt|^2 between an anomaly field and ground truth.
double metric_pre(const Matrix& s_map, const Matrix& gt_map);

void save_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
void save_score_map(const AnomalyScoreMap& map, const std::filesystem::path& csv_path,
                    const std::filesystem::path& pgm_path);

}  // namespace hadlrr

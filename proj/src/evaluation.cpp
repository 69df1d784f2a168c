#include "hadlrr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "hadlrr/error.hpp"

namespace hadlrr {

void AnomalyScoreMap::validate() const {
  if (scores.size() != shape.pixels())
    throw DataError("score map size does not match its shape");
  if (!scores.allFinite()) throw DataError("score map contains non-finite values");
  if (scores.size() > 0 && (scores.minCoeff() < 0.0 || scores.maxCoeff() > 1.0))
    throw DataError("score map values must lie in [0,1]");
}

Array minmax_normalize(const Array& raw) {
  if (raw.size() == 0) return raw;
  const double lo = raw.minCoeff(), hi = raw.maxCoeff();
  if (!(hi > lo)) return Array::Zero(raw.size());
  return (raw - lo) / (hi - lo);
}

Array column_norms(const Matrix& field) { return field.colwise().norm().transpose().array(); }

namespace {

void check_labels(const Array& scores, const GroundTruthMask& gt) {
  if (static_cast<Index>(gt.labels.size()) != scores.size())
    throw DataError("roc: score count does not match mask size");
  const Index pos = gt.anomaly_count();
  if (pos == 0 || pos == scores.size())
    throw DataError("roc: mask needs at least one anomaly and one background pixel");
}

}  // namespace

double trapezoid_area(const std::vector<RocPoint>& points) {
  double area = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].far - points[i - 1].far) * (points[i].pd + points[i - 1].pd) * 0.5;
  return area;
}

RocCurve roc(const Array& scores, const GroundTruthMask& gt) {
  check_labels(scores, gt);
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return scores[a] > scores[b]; });

  const double pos = static_cast<double>(gt.anomaly_count());
  const double neg = static_cast<double>(n) - pos;

  // Thresholds step down through the distinct scores; the +inf sentinel
  // gives (0,0) and the last group (equivalent to -inf) gives (1,1).
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  Index tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double level = scores[order[i]];
    while (i < order.size() && scores[order[i]] == level) {
      if (gt.labels[static_cast<std::size_t>(order[i])]) ++tp; else ++fp;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  curve.points.back() = {1.0, 1.0};
  curve.auc = trapezoid_area(curve.points);
  return curve;
}

RocCurve roc(const AnomalyScoreMap& scores, const GroundTruthMask& gt) {
  if (!(scores.shape == gt.shape)) throw DataError("roc: score map and mask shapes differ");
  return roc(scores.scores, gt);
}

double auc_pair_statistic(const Array& scores, const GroundTruthMask& gt) {
  check_labels(scores, gt);
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] < scores[b]; });

  // Midranks (1-based) handle ties as half pairs.
  double rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (gt.labels[static_cast<std::size_t>(order[t])]) rank_sum += midrank;
    i = j;
  }
  const double pos = static_cast<double>(gt.anomaly_count());
  const double neg = static_cast<double>(n) - pos;
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

double metric_mse(const Matrix& x, const Matrix& recon) {
  if (x.rows() != recon.rows() || x.cols() != recon.cols())
    throw std::invalid_argument("metric_mse: shape mismatch");
  const double denom = x.squaredNorm();
  if (!(denom > 0)) throw std::invalid_argument("metric_mse: input has zero norm");
  return (x - recon).squaredNorm() / denom;
}

double metric_pre(const Matrix& s_map, const Matrix& gt_map) {
  if (s_map.rows() != gt_map.rows() || s_map.cols() != gt_map.cols())
    throw std::invalid_argument("metric_pre: shape mismatch");
  const double denom = gt_map.squaredNorm();
  if (!(denom > 0)) throw std::invalid_argument("metric_pre: ground truth has zero norm");
  return (s_map - gt_map).squaredNorm() / denom;
}

void save_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  out << "# auc=" << curve.auc << "\n";
  out << "far,pd\n";
  for (const auto& p : curve.points) out << p.far << "," << p.pd << "\n";
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void save_score_map(const AnomalyScoreMap& map, const std::filesystem::path& csv_path,
                    const std::filesystem::path& pgm_path) {
  map.validate();
  save_grid_csv(map.scores, map.shape, csv_path);
  save_grid_pgm(map.scores, map.shape, pgm_path);
}

}  // namespace hadlrr

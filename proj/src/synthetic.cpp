#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>

#include "hadlrr/hsi_io.hpp"

namespace hadlrr {

void SyntheticSceneSpec::validate() const {
  if (bands <= 0 || rows <= 0 || cols <= 0)
    throw std::invalid_argument("synthetic scene: bands, rows and cols must be positive");
  if (background_rank < 1 || background_rank >= bands)
    throw std::invalid_argument("synthetic scene: need 1 <= background_rank < bands");
  if (n_anomalies < 0)
    throw std::invalid_argument("synthetic scene: n_anomalies must be nonnegative");
  if (!(anomaly_fraction > 0.0 && anomaly_fraction < 1.0))
    throw std::invalid_argument("synthetic scene: anomaly_fraction must lie in (0,1)");
  if (static_cast<double>(n_anomalies) > anomaly_fraction * static_cast<double>(rows * cols) + 1e-9)
    throw std::invalid_argument(
        "synthetic scene: n_anomalies exceeds anomaly_fraction * rows * cols");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw std::invalid_argument("synthetic scene: noise_sigma must be finite and >= 0");
  if (!(anomaly_strength > 0.0) || !std::isfinite(anomaly_strength))
    throw std::invalid_argument("synthetic scene: anomaly_strength must be positive");
}

Index SyntheticSceneSpec::anomalous_pixels() const {
  if (n_anomalies == 0) return 0;
  const auto wanted = static_cast<Index>(
      std::llround(anomaly_fraction * static_cast<double>(rows * cols)));
  return std::max(n_anomalies, wanted);
}

namespace {

// Smooth positive spectral profile: a floor plus a few Gaussian bumps.
Vector smooth_profile(Index bands, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double b = static_cast<double>(bands);
  Vector p = Vector::Constant(bands, 0.1 + 0.2 * unit(rng));
  for (int bump = 0; bump < 3; ++bump) {
    const double amp = 0.2 + 0.6 * unit(rng);
    const double center = b * unit(rng);
    const double width = b / 10.0 + (b / 3.0 - b / 10.0) * unit(rng);
    for (Index i = 0; i < bands; ++i) {
      const double t = (static_cast<double>(i) - center) / width;
      p[i] += amp * std::exp(-0.5 * t * t);
    }
  }
  return p;
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec) {
  spec.validate();
  const Index B = spec.bands, R = spec.rows, C = spec.cols, M = R * C;
  const Index r = spec.background_rank;
  const Index n_anom_px = spec.anomalous_pixels();
  if (n_anom_px > M) throw std::invalid_argument("synthetic scene: more anomalies than pixels");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix endmembers(B, r);
  for (Index j = 0; j < r; ++j) endmembers.col(j) = smooth_profile(B, rng);

  // Nonnegative abundances, flat Dirichlet per pixel.
  Matrix abundance(r, M);
  for (Index m = 0; m < M; ++m) {
    for (Index j = 0; j < r; ++j) abundance(j, m) = -std::log(1.0 - unit(rng));
    abundance.col(m) /= abundance.col(m).sum();
  }
  Matrix x = endmembers * abundance;

  Eigen::HouseholderQR<Matrix> qr(endmembers);
  Matrix basis = qr.householderQ() * Matrix::Identity(B, r);

  GroundTruthMask mask{{R, C}, std::vector<std::uint8_t>(static_cast<std::size_t>(M), 0)};
  if (spec.n_anomalies > 0) {
    const double mean_norm = x.colwise().norm().mean();
    const Index n_clusters = spec.n_anomalies;
    std::vector<std::uint8_t> blocked(static_cast<std::size_t>(M), 0);
    std::uniform_int_distribution<Index> pick(0, M - 1);

    for (Index k = 0; k < n_clusters; ++k) {
      const Index size = n_anom_px / n_clusters + (k < n_anom_px % n_clusters ? 1 : 0);

      Vector sig = smooth_profile(B, rng);
      sig -= basis * (basis.transpose() * sig);
      sig *= spec.anomaly_strength * mean_norm / sig.norm();

      // Seed away from existing clusters when possible, then grow by BFS.
      Index seed_px = pick(rng);
      for (int attempt = 0; attempt < 1000 && blocked[static_cast<std::size_t>(seed_px)]; ++attempt)
        seed_px = pick(rng);
      if (blocked[static_cast<std::size_t>(seed_px)] || mask.labels[static_cast<std::size_t>(seed_px)]) {
        for (Index p = 0; p < M; ++p)
          if (!mask.labels[static_cast<std::size_t>(p)]) {
            seed_px = p;
            break;
          }
      }

      std::deque<Index> frontier{seed_px};
      Index placed = 0;
      std::vector<Index> members;
      while (!frontier.empty() && placed < size) {
        const Index p = frontier.front();
        frontier.pop_front();
        if (mask.labels[static_cast<std::size_t>(p)]) continue;
        mask.labels[static_cast<std::size_t>(p)] = 1;
        members.push_back(p);
        ++placed;
        const Index pr = p / C, pc = p % C;
        const Index nbr[4][2] = {{pr - 1, pc}, {pr + 1, pc}, {pr, pc - 1}, {pr, pc + 1}};
        for (const auto& n : nbr)
          if (n[0] >= 0 && n[0] < R && n[1] >= 0 && n[1] < C)
            frontier.push_back(n[0] * C + n[1]);
      }
      // Fill any shortfall from the first free pixels so the count is exact.
      for (Index p = 0; p < M && placed < size; ++p)
        if (!mask.labels[static_cast<std::size_t>(p)]) {
          mask.labels[static_cast<std::size_t>(p)] = 1;
          members.push_back(p);
          ++placed;
        }

      for (Index p : members) {
        x.col(p) += sig;
        const Index pr = p / C, pc = p % C;
        for (Index dr = -1; dr <= 1; ++dr)
          for (Index dc = -1; dc <= 1; ++dc) {
            const Index rr = pr + dr, cc = pc + dc;
            if (rr >= 0 && rr < R && cc >= 0 && cc < C)
              blocked[static_cast<std::size_t>(rr * C + cc)] = 1;
          }
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (Index m = 0; m < M; ++m)
      for (Index b = 0; b < B; ++b) x(b, m) += noise(rng);
  }

  return {matrix_to_cube({x, {R, C}}), std::move(mask), std::move(basis)};
}

}  // namespace hadlrr

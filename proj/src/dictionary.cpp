#include "hadlrr/dictionary.hpp"

#include <limits>
#include <random>
#include <stdexcept>

#include "hadlrr/numerics.hpp"

namespace hadlrr {

namespace {

Index nearest(const Matrix& centroids, const Eigen::Ref<const Vector>& point, double* dist) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.cols(); ++c) {
    const double d = (centroids.col(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

Matrix plus_plus_seeds(const Matrix& x, Index k, std::mt19937_64& rng) {
  const Index m = x.cols();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<char> chosen(static_cast<std::size_t>(m), 0);
  Matrix seeds(x.rows(), k);

  Index first = std::min<Index>(static_cast<Index>(unit(rng) * static_cast<double>(m)), m - 1);
  seeds.col(0) = x.col(first);
  chosen[static_cast<std::size_t>(first)] = 1;

  Vector d2(m);
  for (Index j = 0; j < m; ++j) d2[j] = (x.col(j) - seeds.col(0)).squaredNorm();

  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0) {
      double target = unit(rng) * total;
      for (Index j = 0; j < m; ++j) {
        if (d2[j] <= 0) continue;
        pick = j;
        target -= d2[j];
        if (target < 0) break;
      }
    }
    if (pick < 0) {
      // Every point coincides with a seed; fall back to the first unused one.
      for (Index j = 0; j < m; ++j)
        if (!chosen[static_cast<std::size_t>(j)]) {
          pick = j;
          break;
        }
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    seeds.col(c) = x.col(pick);
    for (Index j = 0; j < m; ++j)
      d2[j] = std::min(d2[j], (x.col(j) - seeds.col(c)).squaredNorm());
  }
  return seeds;
}

}  // namespace

KmeansResult kmeans(const Matrix& x, Index k, int max_iters, std::uint64_t seed) {
  const Index m = x.cols();
  if (k < 1 || k > m) throw std::invalid_argument("kmeans: need 1 <= k <= number of pixels");
  if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");

  std::mt19937_64 rng(seed);
  KmeansResult res;
  res.centroids = plus_plus_seeds(x, k, rng);
  res.assignments.assign(static_cast<std::size_t>(m), -1);

  std::vector<Index> counts(static_cast<std::size_t>(k));
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Index j = 0; j < m; ++j) {
      const Index c = nearest(res.centroids, x.col(j), nullptr);
      if (c != res.assignments[static_cast<std::size_t>(j)]) {
        res.assignments[static_cast<std::size_t>(j)] = c;
        changed = true;
      }
    }

    Matrix sums = Matrix::Zero(x.rows(), k);
    std::fill(counts.begin(), counts.end(), 0);
    for (Index j = 0; j < m; ++j) {
      const Index c = res.assignments[static_cast<std::size_t>(j)];
      sums.col(c) += x.col(j);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (Index c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        res.centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);

    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = -1;
      double far_d = -1;
      for (Index j = 0; j < m; ++j) {
        const Index owner = res.assignments[static_cast<std::size_t>(j)];
        if (counts[static_cast<std::size_t>(owner)] < 2) continue;
        const double d = (x.col(j) - res.centroids.col(owner)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = j;
        }
      }
      if (far < 0) continue;
      --counts[static_cast<std::size_t>(res.assignments[static_cast<std::size_t>(far)])];
      res.assignments[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      res.centroids.col(c) = x.col(far);
      changed = true;
    }

    double inertia = 0;
    for (Index j = 0; j < m; ++j)
      inertia += (x.col(j) - res.centroids.col(res.assignments[static_cast<std::size_t>(j)])).squaredNorm();
    res.inertia = inertia;
    res.inertia_history.push_back(inertia);
    res.iterations = it + 1;
    if (!changed) break;
  }
  return res;
}

DictionaryInit init_dictionary(const Matrix& x, Index k, std::uint64_t seed, int max_iters) {
  auto km = kmeans(x, k, max_iters, seed);
  Matrix atoms = std::move(km.centroids);
  for (Index c = 0; c < atoms.cols(); ++c) {
    const double n = atoms.col(c).norm();
    if (n > 0) atoms.col(c) /= n;
  }
  Matrix coef = ridge_solve(atoms, x, kInitRidge);
  return {std::move(atoms), std::move(coef)};
}

}  // namespace hadlrr

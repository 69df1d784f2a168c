#pragma once

#include <cstdint>
#include <vector>

#include "hadlrr/types.hpp"

namespace hadlrr {

struct KmeansResult {
  Matrix centroids;           // bands x k, one atom per column
  std::vector<Index> assignments;
  double inertia = 0;         // total within-cluster squared distance
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
  int iterations = 0;
};

/// Lloyd's algorithm on the columns of x with k-means++ seeding drawn from
/// `seed`. Empty clusters are re-seeded with the point farthest from its
/// current centroid.
KmeansResult kmeans(const Matrix& x, Index k, int max_iters, std::uint64_t seed);

struct DictionaryInit {
  Matrix atoms;         // bands x k, unit-norm columns
  Matrix coefficients;  // k x pixels
};

/// Default atom count for dictionary initialisation.
inline constexpr Index kDefaultAtoms = 15;
inline constexpr int kDefaultKmeansIters = 100;
/// Ridge weight used to fit the initial coefficients.
inline constexpr double kInitRidge = 1e-6;

/// K-means atoms normalised to unit length, coefficients by ridge regression
/// of x onto them.
DictionaryInit init_dictionary(const Matrix& x, Index k, std::uint64_t seed,
                               int max_iters = kDefaultKmeansIters);

}  // namespace hadlrr

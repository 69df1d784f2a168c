#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "hadlrr/error.hpp"
#include "hadlrr/rx.hpp"
#include "oracles.hpp"

using namespace hadlrr;

namespace {

HsiCube cube_from_matrix(const Matrix& x, Index rows, Index cols) {
  return matrix_to_cube({x, {rows, cols}});
}

std::vector<Index> argsort(const Array& a) {
  std::vector<Index> idx(static_cast<std::size_t>(a.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Index i, Index j) { return a[i] < a[j]; });
  return idx;
}

}  // namespace

TEST(GlobalRx, IdenticalPixelsScoreZero) {
  Matrix x = Vector::LinSpaced(4, 1, 4).replicate(1, 9);
  auto map = global_rx({x, {3, 3}});
  EXPECT_TRUE((map.scores == 0).all());
}

TEST(GlobalRx, WhitenedDataGivesEuclideanDistance) {
  std::mt19937_64 rng(1);
  Matrix x = oracle::random_matrix(3, 200, rng);
  // Whiten exactly so the sample covariance is the identity.
  Matrix c = x.colwise() - x.rowwise().mean();
  Matrix cov = c * c.transpose() / 200.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  Matrix w = es.operatorInverseSqrt() * c;
  Array raw = global_rx_raw(w, 0.0);
  for (Index j = 0; j < 200; ++j) EXPECT_NEAR(raw[j], w.col(j).squaredNorm(), 1e-10);
}

TEST(GlobalRx, PlantedOutlierRanksFirst) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Matrix x = oracle::random_matrix(5, 400, rng);
    x.col(123) += 10.0 * Vector::Ones(5).normalized();
    auto map = global_rx({x, {20, 20}});
    Index top;
    map.scores.maxCoeff(&top);
    EXPECT_EQ(top, 123) << "seed " << seed;
  }
}

TEST(GlobalRx, RankingInvariantUnderBandMixing) {
  std::mt19937_64 rng(2);
  Matrix x = oracle::random_matrix(4, 60, rng);
  Matrix mix = oracle::random_matrix(4, 4, rng) + 3 * Matrix::Identity(4, 4);
  Vector shift = oracle::random_matrix(4, 1, rng);
  Array a = global_rx_raw(x, 0.0);
  Array b = global_rx_raw((mix * x).colwise() + shift, 0.0);
  EXPECT_LT((a - b).abs().maxCoeff(), 1e-8 * a.maxCoeff());
  EXPECT_EQ(argsort(a), argsort(b));
}

TEST(GlobalRx, SingularCovarianceWithoutRidgeThrows) {
  std::mt19937_64 rng(3);
  Matrix x = oracle::random_matrix(5, 3, rng);  // fewer pixels than bands
  EXPECT_THROW(global_rx_raw(x, 0.0), NumericalError);
  EXPECT_NO_THROW(global_rx_raw(x));
}

TEST(LocalRx, ConstantImageScoresZero) {
  HsiCube cube = cube_from_matrix(Matrix::Constant(3, 49, 2.5), 7, 7);
  auto map = local_rx(cube, {3, 5});
  EXPECT_TRUE((map.scores == 0).all());
}

TEST(LocalRx, BrightPixelOnConstantBackgroundWins) {
  Matrix x = Matrix::Constant(3, 81, 1.0);
  x.col(40) = Vector::Constant(3, 9.0);
  auto map = local_rx(cube_from_matrix(x, 9, 9), {3, 7});
  EXPECT_EQ(map.scores[40], 1.0);
  Index top;
  map.scores.maxCoeff(&top);
  EXPECT_EQ(top, 40);
}

TEST(LocalRx, MatchesNaivePerPixelOracle) {
  std::mt19937_64 rng(4);
  const Index rows = 9, cols = 9, bands = 3;
  Matrix x = oracle::random_matrix(bands, rows * cols, rng);
  HsiCube cube = cube_from_matrix(x, rows, cols);
  LocalRxConfig cfg{3, 7, 1e-6};
  Array raw = local_rx_raw(cube, cfg);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      std::vector<Vector> bg;
      for (Index rr = 0; rr < rows; ++rr)
        for (Index cc = 0; cc < cols; ++cc) {
          const Index dr = std::abs(rr - r), dc = std::abs(cc - c);
          if (std::max(dr, dc) > 3 || std::max(dr, dc) <= 1) continue;
          bg.push_back(x.col(rr * cols + cc));
        }
      const double expected = oracle::mahalanobis_naive(x.col(r * cols + c), bg, 1e-6);
      EXPECT_NEAR(raw[r * cols + c], expected, 1e-8 * std::max(1.0, expected));
    }
}

TEST(LocalRx, WholeImageWindowEqualsLeaveOneOutGlobal) {
  std::mt19937_64 rng(5);
  const Index rows = 6, cols = 5, bands = 3;
  Matrix x = oracle::random_matrix(bands, rows * cols, rng);
  LocalRxConfig cfg{1, 2 * std::max(rows, cols) + 1, 1e-6};
  Array raw = local_rx_raw(cube_from_matrix(x, rows, cols), cfg);
  for (Index j = 0; j < rows * cols; ++j) {
    Matrix others(bands, rows * cols - 1);
    for (Index i = 0, n = 0; i < rows * cols; ++i)
      if (i != j) others.col(n++) = x.col(i);
    // Leave-one-out global statistics, same ridge rule.
    const Vector mean = others.rowwise().mean();
    Matrix c = others.colwise() - mean;
    Matrix cov = c * c.transpose() / static_cast<double>(others.cols());
    cov.diagonal().array() += 1e-6 * cov.trace() / bands;
    const Vector diff = x.col(j) - mean;
    EXPECT_NEAR(raw[j], diff.dot(cov.ldlt().solve(diff)), 1e-8);
  }
}

TEST(LocalRx, ConfigValidationAndEmptyAnnulus) {
  HsiCube cube = cube_from_matrix(Matrix::Ones(2, 9), 3, 3);
  EXPECT_THROW(local_rx(cube, {4, 7}), std::invalid_argument);
  EXPECT_THROW(local_rx(cube, {5, 5}), std::invalid_argument);
  // A 5x5 guard covers the whole 3x3 image: no background samples.
  EXPECT_THROW(local_rx(cube, {5, 7}), DataError);
}

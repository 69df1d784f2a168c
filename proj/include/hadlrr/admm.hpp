#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hadlrr/evaluation.hpp"
#include "hadlrr/types.hpp"

namespace hadlrr {

/// Penalty weights and schedule for
///   min 1/2|X - DL - S|^2 + l1/2 |D|^2 + l2 |L|_* + l3 |S|_{2,1}
/// solved with the split L = J.
struct AdmmConfig {
  double lambda1 = 0.5;
  double lambda2 = 1.2e-5;
  double lambda3 = 1e-5;
  double mu = 1.0;         // initial augmented-Lagrangian weight
  double rho = 1.5;        // mu growth factor per iteration
  double mu_max = 1e6;
  /// Stop tolerance on |L - J|_F; unset means 1e-6 * |X|_F.
  std::optional<double> eps_primal;
  /// Stop tolerance on |(DL+S)_k - (DL+S)_{k-1}|_F^2; unset means 1e-8 * |X|_F^2.
  std::optional<double> eps_recon;
  int max_iters = 100;
  /// Rescale atoms to unit norm after each D-update (product DL unchanged).
  bool normalize_atoms = true;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// The ADMM variables: dictionary D (bands x k), coefficients L (k x M),
/// anomalies S (bands x M), split variable J and scaled multiplier d (k x M).
struct LrrState {
  Matrix d_atoms;
  Matrix l_coef;
  Matrix s_anom;
  Matrix j_aux;
  Matrix d_mult;
  double mu = 1.0;

  /// S = 0, J = 0, d = 0.
  static LrrState initial(const Matrix& x, const Matrix& d0, const Matrix& l0, double mu);

  Matrix reconstruction() const { return d_atoms * l_coef + s_anom; }
  /// Name of the first variable holding a non-finite entry, or empty.
  std::string first_non_finite() const;
};

double objective(const Matrix& x, const LrrState& st, const AdmmConfig& cfg);
/// Objective with the nuclear norm moved to J plus mu/2 |L - J + d|^2.
double augmented_lagrangian(const Matrix& x, const LrrState& st, const AdmmConfig& cfg);

LrrState update_d(const Matrix& x, LrrState st, const AdmmConfig& cfg);
LrrState update_l(const Matrix& x, LrrState st, const AdmmConfig& cfg);
LrrState update_s(const Matrix& x, LrrState st, const AdmmConfig& cfg);
LrrState update_j(LrrState st, const AdmmConfig& cfg);
LrrState update_multiplier(LrrState st, const AdmmConfig& cfg);

/// Unit-norm atoms with the inverse scale folded into the rows of L.
/// Zero atoms are left untouched.
void normalize_atoms(Matrix& atoms, Matrix& coef);

enum class StopReason { Converged, MaxIterations };
std::string to_string(StopReason reason);

struct TraceRecord {
  int iter = 0;
  double objective = 0;
  double primal_residual = 0;  // |L - J|_F
  double recon_error = 0;      // |X - DL - S|_F
  double mu = 0;               // weight used by this iteration
};

struct AdmmResult {
  LrrState state;
  std::vector<TraceRecord> trace;
  StopReason reason = StopReason::MaxIterations;
};

/// Runs D, L, S, J, multiplier updates until both stop tests pass or
/// max_iters is reached. Throws NumericalError naming the iteration and
/// variable if anything becomes non-finite.
AdmmResult admm_run(const Matrix& x, const AdmmConfig& cfg, const Matrix& d0, const Matrix& l0);

/// Column norms of S, min-max normalised.
AnomalyScoreMap anomaly_scores(const LrrState& st, ImageShape shape);

void save_trace_csv(const std::vector<TraceRecord>& trace, const std::filesystem::path& path);

}  // namespace hadlrr

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hadlrr/admm.hpp"
#include "hadlrr/types.hpp"

namespace hadlrr {

/// Learnable scalars of one unfolded stage. All strictly positive.
struct StageParams {
  double lambda1 = 0.5;   // dictionary ridge weight
  double mu = 1.0;        // coupling weight of the coefficient update
  double lambda3 = 1e-5;  // column soft-threshold
  double theta = 1.2e-5;  // singular value threshold (lambda2 / mu)

  bool valid() const;
  bool operator==(const StageParams&) const = default;
};

struct UnfoldedModel {
  std::vector<StageParams> stages;
  Index k_atoms = 15;
  bool normalize_each_stage = false;

  Index depth() const { return static_cast<Index>(stages.size()); }
  void validate() const;
  bool operator==(const UnfoldedModel&) const = default;
};

/// Stage k gets exactly the weights iteration k of admm_run would use with
/// `cfg`: lambda1, lambda3, mu_k = min(rho^k mu, mu_max), theta = lambda2 / mu_k.
UnfoldedModel init_from_admm(Index k_stages, Index k_atoms = 15,
                             const AdmmConfig& cfg = AdmmConfig{});

struct StageRecord {
  int stage = 0;
  double loss = 0;             // reconstruction loss of D L + S at this stage
  double primal_residual = 0;  // |L - J|_F
  double recon_error = 0;      // |X - DL - S|_F
  double mu = 0;
};

struct ForwardResult {
  LrrState state;
  std::vector<StageRecord> trace;
  Matrix x_hat;  // D^K L^K + S^K
};

/// Runs the K stages (dictionary, coefficient, sparse, auxiliary and
/// multiplier sub-networks) from (d0, l0) with J = d = 0. Throws
/// NumericalError naming the stage and sub-network on a non-finite value.
ForwardResult forward(const UnfoldedModel& model, const Matrix& x, const Matrix& d0,
                      const Matrix& l0);

/// Mean over pixels of the squared spectral reconstruction error.
double loss(const Matrix& x, const Matrix& x_hat);

struct TrainOptions {
  double probe_step = 0.05;    // finite-difference step in log-parameter space
  double max_step = 2.0;       // largest log-space move per accepted step
  int backtracks = 4;
};

struct TrainResult {
  UnfoldedModel model;
  std::vector<double> loss_history;  // initial loss, then one per accepted step
  int evaluations = 0;
};

/// Derivative-free coordinate descent on the log of every stage scalar:
/// central differences per coordinate, a Newton or sign step, then
/// backtracking. A step is kept only if it strictly lowers the loss.
/// `budget` counts forward evaluations and must be >= 4K.
TrainResult train(const UnfoldedModel& model, const Matrix& x, const Matrix& d0,
                  const Matrix& l0, int budget, std::uint64_t seed,
                  const TrainOptions& opts = {});

std::string checkpoint_to_json(const UnfoldedModel& model);
UnfoldedModel checkpoint_from_json(const std::string& text);
void save_checkpoint(const UnfoldedModel& model, const std::filesystem::path& path);
UnfoldedModel load_checkpoint(const std::filesystem::path& path);

void save_stage_trace_csv(const std::vector<StageRecord>& trace,
                          const std::filesystem::path& path);
void save_loss_history_csv(const std::vector<double>& history,
                           const std::filesystem::path& path);

}  // namespace hadlrr

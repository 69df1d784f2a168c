#include "hadlrr/admm.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

#include "hadlrr/error.hpp"
#include "hadlrr/numerics.hpp"

namespace hadlrr {

void AdmmConfig::validate() const {
  auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!nonneg(lambda1) || !nonneg(lambda2) || !nonneg(lambda3))
    throw std::invalid_argument("admm: lambda1, lambda2, lambda3 must be finite and >= 0");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("admm: mu must be > 0");
  if (!(rho > 1.0)) throw std::invalid_argument("admm: rho must be > 1");
  if (!(mu_max >= mu)) throw std::invalid_argument("admm: need mu <= mu_max");
  if (eps_primal && !(*eps_primal > 0)) throw std::invalid_argument("admm: eps_primal must be > 0");
  if (eps_recon && !(*eps_recon > 0)) throw std::invalid_argument("admm: eps_recon must be > 0");
  if (max_iters < 1) throw std::invalid_argument("admm: max_iters must be >= 1");
}

LrrState LrrState::initial(const Matrix& x, const Matrix& d0, const Matrix& l0, double mu) {
  if (d0.rows() != x.rows() || l0.rows() != d0.cols() || l0.cols() != x.cols())
    throw std::invalid_argument("admm: initial D/L shapes inconsistent with X");
  const Index k = d0.cols(), m = x.cols();
  return {d0, l0, Matrix::Zero(x.rows(), m), Matrix::Zero(k, m), Matrix::Zero(k, m), mu};
}

std::string LrrState::first_non_finite() const {
  if (!d_atoms.allFinite()) return "D";
  if (!l_coef.allFinite()) return "L";
  if (!s_anom.allFinite()) return "S";
  if (!j_aux.allFinite()) return "J";
  if (!d_mult.allFinite()) return "d";
  if (!std::isfinite(mu)) return "mu";
  return {};
}

double objective(const Matrix& x, const LrrState& st, const AdmmConfig& cfg) {
  const double fit = 0.5 * (x - st.d_atoms * st.l_coef - st.s_anom).squaredNorm();
  double value = fit + 0.5 * cfg.lambda1 * st.d_atoms.squaredNorm() +
                 cfg.lambda3 * l21_norm(st.s_anom);
  if (cfg.lambda2 != 0) value += cfg.lambda2 * nuclear_norm(st.l_coef);
  return value;
}

double augmented_lagrangian(const Matrix& x, const LrrState& st, const AdmmConfig& cfg) {
  double value = 0.5 * (x - st.d_atoms * st.l_coef - st.s_anom).squaredNorm() +
                 0.5 * cfg.lambda1 * st.d_atoms.squaredNorm() +
                 cfg.lambda3 * l21_norm(st.s_anom) +
                 0.5 * st.mu * (st.l_coef - st.j_aux + st.d_mult).squaredNorm();
  if (cfg.lambda2 != 0) value += cfg.lambda2 * nuclear_norm(st.j_aux);
  return value;
}

LrrState update_d(const Matrix& x, LrrState st, const AdmmConfig& cfg) {
  // D^T = argmin 1/2|(X - S)^T - L^T D^T|^2 + l1/2 |D^T|^2
  st.d_atoms = ridge_solve(st.l_coef.transpose(), (x - st.s_anom).transpose(), cfg.lambda1)
                   .transpose();
  return st;
}

LrrState update_l(const Matrix& x, LrrState st, const AdmmConfig&) {
  if (!(st.mu > 0)) throw std::invalid_argument("update_l: mu must be > 0");
  Matrix gram = st.d_atoms.transpose() * st.d_atoms;
  gram.diagonal().array() += st.mu;
  Matrix rhs = st.d_atoms.transpose() * (x - st.s_anom) + st.mu * (st.j_aux - st.d_mult);
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("update_l: factorisation failed");
  st.l_coef = llt.solve(rhs);
  return st;
}

LrrState update_s(const Matrix& x, LrrState st, const AdmmConfig& cfg) {
  st.s_anom = prox_l21_columns(x - st.d_atoms * st.l_coef, cfg.lambda3);
  return st;
}

LrrState update_j(LrrState st, const AdmmConfig& cfg) {
  if (!(st.mu > 0)) throw std::invalid_argument("update_j: mu must be > 0");
  st.j_aux = svt(st.l_coef + st.d_mult, cfg.lambda2 / st.mu);
  return st;
}

LrrState update_multiplier(LrrState st, const AdmmConfig& cfg) {
  st.d_mult += st.l_coef - st.j_aux;
  st.mu = std::min(cfg.rho * st.mu, cfg.mu_max);
  return st;
}

void normalize_atoms(Matrix& atoms, Matrix& coef) {
  for (Index c = 0; c < atoms.cols(); ++c) {
    const double n = atoms.col(c).norm();
    if (n > 0) {
      atoms.col(c) /= n;
      coef.row(c) *= n;
    }
  }
}

std::string to_string(StopReason reason) {
  return reason == StopReason::Converged ? "converged" : "max_iterations";
}

AdmmResult admm_run(const Matrix& x, const AdmmConfig& cfg, const Matrix& d0, const Matrix& l0) {
  cfg.validate();
  const double xnorm = x.norm();
  auto positive_or_min = [](double v) { return v > 0 ? v : std::numeric_limits<double>::min(); };
  const double eps = cfg.eps_primal.value_or(positive_or_min(1e-6 * xnorm));
  const double zeta = cfg.eps_recon.value_or(positive_or_min(1e-8 * xnorm * xnorm));

  AdmmResult res;
  LrrState st = LrrState::initial(x, d0, l0, cfg.mu);
  Matrix prev_recon = st.reconstruction();

  auto check = [&](int iter, const char* step) {
    if (auto bad = st.first_non_finite(); !bad.empty())
      throw NumericalError("admm: non-finite value in " + bad + " after " + step +
                           " at iteration " + std::to_string(iter));
  };

  for (int it = 0; it < cfg.max_iters; ++it) {
    const double mu_used = st.mu;
    st = update_d(x, std::move(st), cfg);
    check(it, "D-update");
    if (cfg.normalize_atoms) normalize_atoms(st.d_atoms, st.l_coef);
    st = update_l(x, std::move(st), cfg);
    check(it, "L-update");
    st = update_s(x, std::move(st), cfg);
    check(it, "S-update");
    st = update_j(std::move(st), cfg);
    check(it, "J-update");
    const double primal = (st.l_coef - st.j_aux).norm();
    st = update_multiplier(std::move(st), cfg);
    check(it, "multiplier update");

    Matrix recon = st.reconstruction();
    const double change = (recon - prev_recon).squaredNorm();
    prev_recon = std::move(recon);
    res.trace.push_back({it, objective(x, st, cfg), primal,
                         (x - prev_recon).norm(), mu_used});
    if (primal < eps && change < zeta) {
      res.reason = StopReason::Converged;
      break;
    }
  }
  res.state = std::move(st);
  return res;
}

AnomalyScoreMap anomaly_scores(const LrrState& st, ImageShape shape) {
  if (shape.pixels() != st.s_anom.cols())
    throw std::invalid_argument("anomaly_scores: shape does not match pixel count");
  return {shape, minmax_normalize(column_norms(st.s_anom))};
}

void save_trace_csv(const std::vector<TraceRecord>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << "iter,objective,primal_residual,recon_error,mu\n";
  for (const auto& r : trace)
    out << r.iter << "," << r.objective << "," << r.primal_residual << "," << r.recon_error
        << "," << r.mu << "\n";
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace hadlrr

#include "hadlrr/unfolded.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hadlrr/error.hpp"
#include "hadlrr/numerics.hpp"

namespace hadlrr {

bool StageParams::valid() const {
  auto pos = [](double v) { return v > 0 && std::isfinite(v); };
  return pos(lambda1) && pos(mu) && pos(lambda3) && pos(theta);
}

void UnfoldedModel::validate() const {
  if (stages.empty()) throw std::invalid_argument("unfolded model needs at least one stage");
  if (k_atoms < 1) throw std::invalid_argument("unfolded model needs k_atoms >= 1");
  for (std::size_t i = 0; i < stages.size(); ++i)
    if (!stages[i].valid())
      throw std::invalid_argument("stage " + std::to_string(i) +
                                  " has a non-positive or non-finite parameter");
}

UnfoldedModel init_from_admm(Index k_stages, Index k_atoms, const AdmmConfig& cfg) {
  if (k_stages < 1) throw std::invalid_argument("init_from_admm: need at least one stage");
  cfg.validate();
  UnfoldedModel model;
  model.k_atoms = k_atoms;
  double mu = cfg.mu;
  for (Index k = 0; k < k_stages; ++k) {
    model.stages.push_back({cfg.lambda1, mu, cfg.lambda3, cfg.lambda2 / mu});
    mu = std::min(cfg.rho * mu, cfg.mu_max);
  }
  return model;
}

namespace {

// DicNet: D = (X - S) Lambda, Lambda = L^T (L L^T + lambda1 I)^{-1}.
Matrix dic_net(const Matrix& x_minus_s, const Matrix& l, double lambda1) {
  Matrix g = l * l.transpose();
  g.diagonal().array() += lambda1;
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalError("DicNet: factorisation failed");
  Matrix lambda_op = llt.solve(l).transpose();
  return x_minus_s * lambda_op;
}

// LRNet: L = Gamma (X - S) + Theta (J - d),
// Gamma = (D^T D + mu I)^{-1} D^T, Theta = (D^T D + mu I)^{-1} mu.
Matrix lr_net(const Matrix& x_minus_s, const Matrix& j_minus_d, const Matrix& d, double mu) {
  Matrix h = d.transpose() * d;
  h.diagonal().array() += mu;
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw NumericalError("LRNet: factorisation failed");
  Matrix gamma = llt.solve(d.transpose());
  Matrix theta = llt.solve(Matrix::Identity(d.cols(), d.cols())) * mu;
  return gamma * x_minus_s + theta * j_minus_d;
}

// SpaNet: r_j / |r_j| * ReLU(|r_j| - lambda3) per column.
Matrix spa_net(const Matrix& residual, double lambda3) {
  Matrix s(residual.rows(), residual.cols());
  for (Index j = 0; j < residual.cols(); ++j) {
    const double n = residual.col(j).norm();
    const double gain = n > 0 ? std::max(0.0, n - lambda3) / n : 0.0;
    s.col(j) = residual.col(j) * gain;
  }
  return s;
}

// VarNet: U ReLU(Sigma - theta) V^T of (L + d).
Matrix var_net(const Matrix& l_plus_d, double theta) {
  auto f = thin_svd(l_plus_d);
  f.sigma = (f.sigma.array() - theta).max(0.0).matrix();
  return f.reconstruct();
}

void require_finite(const Matrix& m, Index stage, const char* net) {
  if (!m.allFinite())
    throw NumericalError("unfolded forward: non-finite output of " + std::string(net) +
                         " at stage " + std::to_string(stage));
}

}  // namespace

ForwardResult forward(const UnfoldedModel& model, const Matrix& x, const Matrix& d0,
                      const Matrix& l0) {
  model.validate();
  ForwardResult out;
  LrrState& st = out.state;
  st = LrrState::initial(x, d0, l0, model.stages.front().mu);

  for (Index k = 0; k < model.depth(); ++k) {
    const auto& p = model.stages[static_cast<std::size_t>(k)];
    st.mu = p.mu;
    const Matrix x_minus_s = x - st.s_anom;

    st.d_atoms = dic_net(x_minus_s, st.l_coef, p.lambda1);
    require_finite(st.d_atoms, k, "DicNet");
    if (model.normalize_each_stage) normalize_atoms(st.d_atoms, st.l_coef);

    st.l_coef = lr_net(x_minus_s, st.j_aux - st.d_mult, st.d_atoms, p.mu);
    require_finite(st.l_coef, k, "LRNet");

    st.s_anom = spa_net(x - st.d_atoms * st.l_coef, p.lambda3);
    require_finite(st.s_anom, k, "SpaNet");

    st.j_aux = var_net(st.l_coef + st.d_mult, p.theta);
    require_finite(st.j_aux, k, "VarNet");

    const Matrix primal = st.l_coef - st.j_aux;
    st.d_mult += primal;
    require_finite(st.d_mult, k, "LarNet");

    const Matrix recon = st.reconstruction();
    out.trace.push_back({static_cast<int>(k), loss(x, recon), primal.norm(),
                         (x - recon).norm(), p.mu});
  }
  out.x_hat = st.reconstruction();
  return out;
}

double loss(const Matrix& x, const Matrix& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw std::invalid_argument("loss: shape mismatch");
  if (x.cols() == 0) return 0.0;
  return (x - x_hat).squaredNorm() / static_cast<double>(x.cols());
}

std::string checkpoint_to_json(const UnfoldedModel& model) {
  nlohmann::ordered_json j;
  j["k_atoms"] = model.k_atoms;
  j["K"] = model.depth();
  j["normalize_each_stage"] = model.normalize_each_stage;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : model.stages)
    j["stages"].push_back(
        {{"lambda1", s.lambda1}, {"mu", s.mu}, {"lambda3", s.lambda3}, {"theta", s.theta}});
  return j.dump(2) + "\n";
}

UnfoldedModel checkpoint_from_json(const std::string& text) {
  UnfoldedModel model;
  try {
    auto j = nlohmann::json::parse(text);
    model.k_atoms = j.at("k_atoms").get<Index>();
    model.normalize_each_stage = j.value("normalize_each_stage", false);
    for (const auto& s : j.at("stages"))
      model.stages.push_back({s.at("lambda1").get<double>(), s.at("mu").get<double>(),
                              s.at("lambda3").get<double>(), s.at("theta").get<double>()});
    if (j.at("K").get<Index>() != model.depth())
      throw DataError("checkpoint: K does not match the number of stages");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return model;
}

void save_checkpoint(const UnfoldedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << checkpoint_to_json(model);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

UnfoldedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

void save_stage_trace_csv(const std::vector<StageRecord>& trace,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << "stage,loss,primal_residual,recon_error,mu\n";
  for (const auto& r : trace)
    out << r.stage << "," << r.loss << "," << r.primal_residual << "," << r.recon_error << ","
        << r.mu << "\n";
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void save_loss_history_csv(const std::vector<double>& history,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << "step,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) out << i << "," << history[i] << "\n";
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace hadlrr

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hadlrr/error.hpp"
#include "hadlrr/unfolded.hpp"

namespace hadlrr {

namespace {

constexpr int kParamsPerStage = 4;
constexpr double kLogBound = 60.0;

double& param_ref(UnfoldedModel& m, std::size_t i) {
  auto& s = m.stages[i / kParamsPerStage];
  switch (i % kParamsPerStage) {
    case 0: return s.lambda1;
    case 1: return s.mu;
    case 2: return s.lambda3;
    default: return s.theta;
  }
}

}  // namespace

TrainResult train(const UnfoldedModel& model, const Matrix& x, const Matrix& d0,
                  const Matrix& l0, int budget, std::uint64_t seed, const TrainOptions& opts) {
  model.validate();
  const std::size_t n_params = model.stages.size() * kParamsPerStage;
  if (budget < static_cast<int>(n_params))
    throw std::invalid_argument("train: budget must be at least 4 evaluations per stage");

  TrainResult res{model, {}, 0};

  auto evaluate = [&](const UnfoldedModel& m) {
    ++res.evaluations;
    try {
      return loss(x, forward(m, x, d0, l0).x_hat);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  // Parameters are optimised as logs so every value stays positive.
  auto with_log = [&](std::size_t i, double log_value) {
    UnfoldedModel m = res.model;
    param_ref(m, i) = std::exp(std::clamp(log_value, -kLogBound, kLogBound));
    return m;
  };

  double current = evaluate(res.model);
  res.loss_history.push_back(current);

  std::vector<std::size_t> order(n_params);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  const double h = opts.probe_step;
  bool improved_in_pass = true;
  while (improved_in_pass && res.evaluations + 2 <= budget) {
    improved_in_pass = false;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      if (res.evaluations + 2 > budget) break;
      const double r0 = std::log(param_ref(res.model, i));
      const double f_plus = evaluate(with_log(i, r0 + h));
      const double f_minus = evaluate(with_log(i, r0 - h));

      double best_f = current, best_r = r0;
      if (f_plus < best_f) best_f = f_plus, best_r = r0 + h;
      if (f_minus < best_f) best_f = f_minus, best_r = r0 - h;

      double step = 0;
      if (std::isfinite(f_plus) && std::isfinite(f_minus)) {
        const double grad = (f_plus - f_minus) / (2 * h);
        const double curv = (f_plus - 2 * current + f_minus) / (h * h);
        if (curv > 0)
          step = -grad / curv;
        else if (grad != 0)
          step = grad > 0 ? -2 * h : 2 * h;
      }
      step = std::clamp(step, -opts.max_step, opts.max_step);

      for (int bt = 0; bt < opts.backtracks && step != 0 && res.evaluations < budget; ++bt) {
        const double f_trial = evaluate(with_log(i, r0 + step));
        if (f_trial < best_f) {
          best_f = f_trial;
          best_r = r0 + step;
          break;
        }
        step *= 0.5;
      }

      if (best_f < current) {
        res.model = with_log(i, best_r);
        current = best_f;
        res.loss_history.push_back(current);
        improved_in_pass = true;
      }
    }
  }
  return res;
}

}  // namespace hadlrr

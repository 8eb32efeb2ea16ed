#include "cogd/beale.hpp"

#include <cmath>

#include "cogd/bilinear_lsq.hpp"

namespace cogd {

double beale_value(const BealeProblem& bp) {
  double total = 0.0;
  for (int p = 1; p <= 3; ++p) {
    const double r =
        bp.constants[p - 1] - bp.x1 + bp.x1 * std::pow(bp.x2, p);
    total += r * r;
  }
  return total;
}

double beale_objective(const BealeProblem& bp) {
  return beale_value(bp) + std::abs(bp.x1) + bp.x2 * bp.x2;
}

std::array<double, 2> beale_gradient(const BealeProblem& bp) {
  double g1 = sign0(bp.x1);
  double g2 = 2.0 * bp.x2;
  for (int p = 1; p <= 3; ++p) {
    const double x2p = std::pow(bp.x2, p);
    const double r = bp.constants[p - 1] - bp.x1 + bp.x1 * x2p;
    g1 += 2.0 * r * (x2p - 1.0);
    g2 += 2.0 * r * bp.x1 * p * std::pow(bp.x2, p - 1);
  }
  return {g1, g2};
}

namespace {

double lr_for(const BealeRunConfig& cfg, OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return cfg.lr_sgd;
    case OptimizerKind::Momentum: return cfg.lr_momentum;
    case OptimizerKind::Adam: return cfg.lr_adam;
  }
  return cfg.lr_sgd;
}

BealeRunResult run_one(const BealeRunConfig& cfg, OptimizerKind kind,
                       bool cogd) {
  BealeRunResult result;
  result.kind = kind;
  result.cogd = cogd;

  const double lr = lr_for(cfg, kind);
  OptimizerOptions opts;
  opts.kind = kind;
  opts.learning_rate = lr;
  opts.momentum = cfg.momentum_coefficient;
  Optimizer opt_sparse(opts);
  Optimizer opt_dense(opts);

  BealeProblem bp;
  bp.x1 = cfg.start_x1;
  bp.x2 = cfg.start_x2;
  bp.constants = cfg.constants;

  CouplingConfig coupling = cfg.coupling;
  coupling.enabled = cogd;
  EpochSnapshot snap;
  snap.x_prev = Eigen::VectorXd::Constant(1, bp.x1);
  snap.a_prev = Eigen::MatrixXd::Constant(1, 1, bp.x2);
  snap.learning_rate = lr;
  CouplingCoordinator coordinator(coupling, snap);

  double path_length = 0.0;
  result.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const auto [g1, g2] = beale_gradient(bp);
    if (!std::isfinite(g1) || !std::isfinite(g2)) {
      result.diverged = true;
      break;
    }
    const Eigen::VectorXd x1_next =
        opt_sparse.step(Eigen::VectorXd::Constant(1, bp.x1),
                        Eigen::VectorXd::Constant(1, g1));
    const Eigen::VectorXd x2_next =
        opt_dense.step(Eigen::VectorXd::Constant(1, bp.x2),
                       Eigen::VectorXd::Constant(1, g2));

    // The residual-derived factor for the scalar pair: the dense-variable
    // gradient with the sparse factor divided out, as in the network cases.
    const double ghat =
        std::abs(bp.x1) < coupling.zero_guard ? g2 : g2 / bp.x1;
    const StepResult step = coordinator.step(
        x1_next, Eigen::MatrixXd::Constant(1, 1, x2_next[0]),
        Eigen::VectorXd::Constant(1, ghat), iter);

    const double prev_x1 = bp.x1;
    const double prev_x2 = bp.x2;
    bp.x1 = step.x[0];
    bp.x2 = x2_next[0];
    path_length += std::hypot(bp.x1 - prev_x1, bp.x2 - prev_x2);

    const double objective = beale_objective(bp);
    result.trace.push_back({static_cast<double>(iter), bp.x1, bp.x2,
                            objective, path_length,
                            step.gate.fire ? 1.0 : 0.0});
    if (!std::isfinite(objective)) {
      result.diverged = true;
      break;
    }
  }
  result.gate_fires = coordinator.fire_count();
  result.path_length = path_length;
  result.final_objective =
      result.trace.empty() ? beale_objective(bp) : result.trace.back()[3];
  return result;
}

}  // namespace

std::vector<BealeRunResult> run_beale_comparison(const BealeRunConfig& cfg) {
  std::vector<BealeRunResult> results;
  for (OptimizerKind kind :
       {OptimizerKind::Sgd, OptimizerKind::Momentum, OptimizerKind::Adam}) {
    for (bool cogd : {false, true}) {
      results.push_back(run_one(cfg, kind, cogd));
    }
  }
  return results;
}

}  // namespace cogd

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cogd/coupling.hpp"
#include "cogd/optimizer.hpp"

namespace cogd {

/// The regularized Beale benchmark: F(x1, x2) = beale(x1, x2) + |x1| + x2^2.
/// x1 is the sparse variable (it carries the absolute-value penalty), x2 the
/// dense one. The third constant defaults to 2.625, which makes (3, 0.5) an
/// exact root of the unregularized function.
struct BealeProblem {
  double x1 = 0.0;
  double x2 = 0.0;
  std::array<double, 3> constants{1.5, 2.25, 2.625};
};

/// The raw (unregularized) Beale function.
double beale_value(const BealeProblem& bp);

/// beale + |x1| + x2^2.
double beale_objective(const BealeProblem& bp);

/// Analytic gradient of beale_objective; the |x1| part uses sign(0) = 0.
std::array<double, 2> beale_gradient(const BealeProblem& bp);

struct BealeRunConfig {
  double start_x1 = 1.0;
  double start_x2 = 2.0;
  std::array<double, 3> constants{1.5, 2.25, 2.625};
  int iterations = 200;
  CouplingConfig coupling;  ///< thresholds: alpha_sparse on |x1|, alpha_dense on |x2|
  double lr_sgd = 0.001;
  double lr_momentum = 0.005;
  double lr_adam = 0.1;
  double momentum_coefficient = 0.9;
};

/// One optimizer x variant trajectory.
struct BealeRunResult {
  OptimizerKind kind = OptimizerKind::Sgd;
  bool cogd = false;
  /// rows: iteration, x1, x2, objective, cumulative path length, gate fired
  std::vector<std::array<double, 6>> trace;
  double final_objective = 0.0;
  double path_length = 0.0;
  std::int64_t gate_fires = 0;
  bool diverged = false;
};

/// Runs {sgd, momentum, adam} x {plain, cogd} from the shared start point
/// and records each trajectory. Divergence is recorded, not thrown.
std::vector<BealeRunResult> run_beale_comparison(const BealeRunConfig& cfg);

}  // namespace cogd

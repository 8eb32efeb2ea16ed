#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace cogd {

enum class NormKind { L1, L2 };

double norm_of(const Eigen::VectorXd& v, NormKind norm);

/// Everything the coupled backtracking adds on top of a base optimizer.
struct CouplingConfig {
  int kernel_exponent = 1;    ///< exponent of the polynomial coupling kernel
  double beta_scale = 0.001;  ///< scale on eta2 * c when forming beta
  double alpha_sparse = 1.0;  ///< norm threshold for the sparse variable
  double alpha_dense = 0.5;   ///< norm threshold for the coupled dense variable
  int period = 1;             ///< apply the gate/backtrack once per this many epochs
  double zero_guard = 1e-8;   ///< "approaches zero" tolerance in the finite difference
  NormKind norm = NormKind::L1;
  bool enabled = true;        ///< false = plain baseline; the coordinator is a no-op

  void validate() const;  ///< throws InvalidInput on a domain violation
};

/// Outcome of the asynchrony test for one epoch.
struct GateDecision {
  bool sparse_is_small = false;  ///< NOT s(x): the sparse variable collapsed
  bool dense_is_large = false;   ///< s(A): the dense variable is still active
  bool fire = false;             ///< conjunction of the two
};

/// s(v): 1 iff R(v) >= alpha under the selected norm. Inclusive threshold.
bool sparsity_indicator(const Eigen::VectorXd& v, double alpha, NormKind norm);

/// Detects asynchronous convergence: the sparse variable's norm fell below
/// its threshold while the dense variable's norm is still above its own.
GateDecision asynchrony_gate(const Eigen::VectorXd& x, const Eigen::VectorXd& a,
                             const CouplingConfig& cfg);

/// Per-coordinate coupling coefficient c_j = <ghat, response.col(j)>^k.
/// With k = 1 this is the plain inner-product vector; higher k applies the
/// polynomial kernel to each inner product.
Eigen::VectorXd coupling_coefficient(const Eigen::VectorXd& ghat,
                                     const Eigen::MatrixXd& response,
                                     int kernel_exponent);

/// Epoch-difference estimate of how the dense variable responds to each
/// sparse coordinate: column j = (a_curr.col(j) - a_prev.col(j)) / dx_j.
/// When |dx_j| or |x_curr[j]| is below zero_guard the column degenerates to
/// all ones, which keeps every output finite.
Eigen::MatrixXd finite_difference_coupling(const Eigen::MatrixXd& a_curr,
                                           const Eigen::MatrixXd& a_prev,
                                           const Eigen::VectorXd& x_curr,
                                           const Eigen::VectorXd& x_prev,
                                           double zero_guard = 1e-8);

/// Projection combining the new iterate with the last backtrack point:
/// x_next + beta (.) x_prev, elementwise.
Eigen::VectorXd project(const Eigen::VectorXd& x_next,
                        const Eigen::VectorXd& x_prev,
                        const Eigen::VectorXd& beta);

/// Values of the coupled pair at the last backtrack point, plus the sparse
/// variable's learning rate (eta2), which scales beta.
struct EpochSnapshot {
  Eigen::VectorXd x_prev;   ///< sparse variable
  Eigen::MatrixXd a_prev;   ///< dense variable; column j couples with x_j
  double learning_rate = 1.0;
};

struct StepResult {
  Eigen::VectorXd x;
  GateDecision gate;
};

/// Epoch-level coordinator owning the gate schedule and snapshot refresh.
///
/// Once per `period` epochs it tests the asynchrony gate; when the gate
/// fires, the sparse variable proposed by the base optimizer is backtracked
/// through the projection, with beta = beta_scale * eta2 * c and c the
/// kernelized coupling coefficient computed from the epoch difference of the
/// dense variable. The snapshot then refreshes whether or not the gate
/// fired, so the difference always spans exactly one period.
///
/// Single-threaded by design: independent coordinators may run in parallel,
/// one coordinator must not be shared.
class CouplingCoordinator {
 public:
  CouplingCoordinator(CouplingConfig cfg, EpochSnapshot initial);

  /// One epoch-level step. x_next is the value the base optimizer proposes,
  /// a_curr the current dense variable (column j coupled with x_j), ghat the
  /// residual-derived factor supplied by the problem. Epochs must increase
  /// strictly across calls.
  StepResult step(const Eigen::VectorXd& x_next, const Eigen::MatrixXd& a_curr,
                  const Eigen::VectorXd& ghat, std::int64_t epoch);

  const EpochSnapshot& snapshot() const { return snap_; }
  const CouplingConfig& config() const { return cfg_; }
  std::int64_t fire_count() const { return fires_; }

 private:
  CouplingConfig cfg_;
  EpochSnapshot snap_;
  std::int64_t fires_ = 0;
  std::int64_t last_epoch_ = -1;
};

}  // namespace cogd

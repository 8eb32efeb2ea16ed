#include "cogd/coupling.hpp"

#include <cmath>
#include <string>

#include "cogd/errors.hpp"

namespace cogd {

double norm_of(const Eigen::VectorXd& v, NormKind norm) {
  return norm == NormKind::L1 ? v.lpNorm<1>() : v.norm();
}

void CouplingConfig::validate() const {
  if (kernel_exponent < 1) throw InvalidInput("kernel_exponent must be >= 1");
  if (beta_scale < 0) throw InvalidInput("beta_scale must be >= 0");
  if (alpha_sparse < 0) throw InvalidInput("alpha_sparse must be >= 0");
  if (alpha_dense < 0) throw InvalidInput("alpha_dense must be >= 0");
  if (period < 1) throw InvalidInput("period must be >= 1");
  if (zero_guard <= 0) throw InvalidInput("zero_guard must be > 0");
}

bool sparsity_indicator(const Eigen::VectorXd& v, double alpha, NormKind norm) {
  if (v.size() == 0) throw InvalidInput("sparsity_indicator: empty array");
  if (alpha < 0) throw InvalidInput("sparsity_indicator: alpha must be >= 0");
  return norm_of(v, norm) >= alpha;
}

GateDecision asynchrony_gate(const Eigen::VectorXd& x, const Eigen::VectorXd& a,
                             const CouplingConfig& cfg) {
  GateDecision d;
  d.sparse_is_small = !sparsity_indicator(x, cfg.alpha_sparse, cfg.norm);
  d.dense_is_large = sparsity_indicator(a, cfg.alpha_dense, cfg.norm);
  d.fire = d.sparse_is_small && d.dense_is_large;
  return d;
}

Eigen::VectorXd coupling_coefficient(const Eigen::VectorXd& ghat,
                                     const Eigen::MatrixXd& response,
                                     int kernel_exponent) {
  if (kernel_exponent < 1)
    throw InvalidInput("coupling_coefficient: kernel_exponent must be >= 1");
  if (response.rows() != ghat.size())
    throw InvalidInput("coupling_coefficient: response rows (" +
                       std::to_string(response.rows()) +
                       ") do not match ghat length (" +
                       std::to_string(ghat.size()) + ")");
  Eigen::VectorXd c = response.transpose() * ghat;
  if (kernel_exponent > 1) {
    for (Eigen::Index j = 0; j < c.size(); ++j)
      c[j] = std::pow(c[j], kernel_exponent);
  }
  return c;
}

Eigen::MatrixXd finite_difference_coupling(const Eigen::MatrixXd& a_curr,
                                           const Eigen::MatrixXd& a_prev,
                                           const Eigen::VectorXd& x_curr,
                                           const Eigen::VectorXd& x_prev,
                                           double zero_guard) {
  if (a_curr.rows() != a_prev.rows() || a_curr.cols() != a_prev.cols())
    throw InvalidInput("finite_difference_coupling: dense shapes differ");
  if (x_curr.size() != x_prev.size())
    throw InvalidInput("finite_difference_coupling: sparse lengths differ");
  if (a_curr.cols() != x_curr.size())
    throw InvalidInput(
        "finite_difference_coupling: one dense column per sparse coordinate "
        "required");

  Eigen::MatrixXd response(a_curr.rows(), a_curr.cols());
  for (Eigen::Index j = 0; j < response.cols(); ++j) {
    const double dx = x_curr[j] - x_prev[j];
    if (std::abs(dx) < zero_guard || std::abs(x_curr[j]) < zero_guard) {
      response.col(j).setOnes();
    } else {
      response.col(j) = (a_curr.col(j) - a_prev.col(j)) / dx;
    }
  }
  return response;
}

Eigen::VectorXd project(const Eigen::VectorXd& x_next,
                        const Eigen::VectorXd& x_prev,
                        const Eigen::VectorXd& beta) {
  if (x_next.size() != x_prev.size() || x_next.size() != beta.size())
    throw InvalidInput("project: argument lengths differ");
  return x_next + beta.cwiseProduct(x_prev);
}

CouplingCoordinator::CouplingCoordinator(CouplingConfig cfg,
                                         EpochSnapshot initial)
    : cfg_(cfg), snap_(std::move(initial)) {
  cfg_.validate();
  if (snap_.learning_rate <= 0)
    throw InvalidInput("EpochSnapshot: learning_rate must be > 0");
  if (snap_.a_prev.cols() != snap_.x_prev.size())
    throw InvalidInput(
        "EpochSnapshot: one dense column per sparse coordinate required");
}

StepResult CouplingCoordinator::step(const Eigen::VectorXd& x_next,
                                     const Eigen::MatrixXd& a_curr,
                                     const Eigen::VectorXd& ghat,
                                     std::int64_t epoch) {
  if (epoch <= last_epoch_)
    throw InvalidInput("CouplingCoordinator: epoch must increase across calls");
  last_epoch_ = epoch;
  if (x_next.size() != snap_.x_prev.size())
    throw InvalidInput("CouplingCoordinator: sparse dimension changed mid-run");
  if (a_curr.rows() != snap_.a_prev.rows() ||
      a_curr.cols() != snap_.a_prev.cols())
    throw InvalidInput("CouplingCoordinator: dense dimension changed mid-run");

  StepResult out{x_next, GateDecision{}};
  if (!cfg_.enabled || epoch % cfg_.period != 0) return out;

  const Eigen::VectorXd a_flat =
      Eigen::Map<const Eigen::VectorXd>(a_curr.data(), a_curr.size());
  out.gate = asynchrony_gate(x_next, a_flat, cfg_);
  if (out.gate.fire) {
    ++fires_;
    if (cfg_.beta_scale != 0.0) {
      const Eigen::MatrixXd response = finite_difference_coupling(
          a_curr, snap_.a_prev, x_next, snap_.x_prev, cfg_.zero_guard);
      const Eigen::VectorXd c =
          coupling_coefficient(ghat, response, cfg_.kernel_exponent);
      const Eigen::VectorXd beta = (cfg_.beta_scale * snap_.learning_rate) * c;
      out.x = project(x_next, snap_.x_prev, beta);
    }
  }

  // Refresh regardless of the gate so the next difference spans one period.
  snap_.x_prev = out.x;
  snap_.a_prev = a_curr;
  return out;
}

}  // namespace cogd

#include "cogd/optimizer.hpp"

#include <cmath>

#include "cogd/errors.hpp"

namespace cogd {

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "momentum") return OptimizerKind::Momentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw InvalidInput("unknown optimizer '" + name +
                     "' (valid: sgd, momentum, adam)");
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

void OptimizerOptions::validate() const {
  if (learning_rate <= 0) throw InvalidInput("learning_rate must be > 0");
  if (momentum < 0 || momentum >= 1)
    throw InvalidInput("momentum must be in [0, 1)");
  if (adam_beta1 < 0 || adam_beta1 >= 1)
    throw InvalidInput("adam_beta1 must be in [0, 1)");
  if (adam_beta2 < 0 || adam_beta2 >= 1)
    throw InvalidInput("adam_beta2 must be in [0, 1)");
  if (adam_epsilon <= 0) throw InvalidInput("adam_epsilon must be > 0");
}

Optimizer::Optimizer(OptimizerOptions opts) : opts_(opts) { opts_.validate(); }

void Optimizer::set_learning_rate(double lr) {
  if (lr <= 0) throw InvalidInput("learning_rate must be > 0");
  opts_.learning_rate = lr;
}

Eigen::VectorXd Optimizer::step(const Eigen::VectorXd& params,
                                const Eigen::VectorXd& grad) {
  if (params.size() != grad.size())
    throw InvalidInput("Optimizer::step: params and grad lengths differ");
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i]))
      throw NumericError("non-finite gradient at index " + std::to_string(i));
  }

  if (first_moment_.size() != params.size()) {
    first_moment_ = Eigen::VectorXd::Zero(params.size());
    second_moment_ = Eigen::VectorXd::Zero(params.size());
  }
  ++step_count_;
  const double lr = opts_.learning_rate;

  switch (opts_.kind) {
    case OptimizerKind::Sgd:
      return params - lr * grad;
    case OptimizerKind::Momentum:
      first_moment_ = opts_.momentum * first_moment_ + grad;
      return params - lr * first_moment_;
    case OptimizerKind::Adam: {
      const double b1 = opts_.adam_beta1;
      const double b2 = opts_.adam_beta2;
      first_moment_ = b1 * first_moment_ + (1 - b1) * grad;
      second_moment_ =
          b2 * second_moment_ + (1 - b2) * grad.cwiseProduct(grad).eval();
      const double c1 = 1 - std::pow(b1, static_cast<double>(step_count_));
      const double c2 = 1 - std::pow(b2, static_cast<double>(step_count_));
      const Eigen::VectorXd m_hat = first_moment_ / c1;
      const Eigen::VectorXd v_hat = second_moment_ / c2;
      return params - lr * (m_hat.array() /
                            (v_hat.array().sqrt() + opts_.adam_epsilon))
                               .matrix();
    }
  }
  return params;  // unreachable
}

double cosine_lr(double base_lr, std::int64_t epoch, std::int64_t total) {
  if (total <= 0) throw InvalidInput("cosine_lr: total must be > 0");
  const double phase = M_PI * static_cast<double>(epoch) /
                       static_cast<double>(total);
  return base_lr * 0.5 * (1.0 + std::cos(phase));
}

}  // namespace cogd

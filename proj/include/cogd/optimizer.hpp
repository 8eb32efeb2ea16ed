#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace cogd {

enum class OptimizerKind { Sgd, Momentum, Adam };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 0.01;
  double momentum = 0.9;        ///< velocity coefficient, [0, 1)
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// First-order optimizer over one flat parameter vector. Moment buffers are
/// sized lazily on the first step; one instance per parameter tensor per run.
class Optimizer {
 public:
  explicit Optimizer(OptimizerOptions opts);

  /// Returns the updated parameters. Throws NumericError (naming the first
  /// offending index) when the gradient is not finite.
  Eigen::VectorXd step(const Eigen::VectorXd& params,
                       const Eigen::VectorXd& grad);

  std::int64_t step_count() const { return step_count_; }
  const OptimizerOptions& options() const { return opts_; }
  void set_learning_rate(double lr);

 private:
  OptimizerOptions opts_;
  Eigen::VectorXd first_moment_;   // momentum velocity / Adam m
  Eigen::VectorXd second_moment_;  // Adam v
  std::int64_t step_count_ = 0;
};

/// Half-cosine decay from base_lr at epoch 0 to 0 at epoch total.
double cosine_lr(double base_lr, std::int64_t epoch, std::int64_t total);

}  // namespace cogd

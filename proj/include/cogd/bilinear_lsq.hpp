#pragma once

#include <Eigen/Dense>

namespace cogd {

/// sign with sign(0) = 0, the L1 subgradient convention used throughout.
inline double sign0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

/// Regularized bilinear least squares: 1/2 ||b - A x||^2 + lambda ||x||_1
/// + dense_reg_weight ||A||_F^2. The 1/2 on the data term makes the
/// analytic gradients below exact.
struct BilinearLSQ {
  Eigen::MatrixXd a_matrix;  // M x N
  Eigen::VectorXd x_vector;  // N
  Eigen::VectorXd b_obs;     // M
  double lambda_sparse = 0.0;
  double dense_reg_weight = 0.0;

  void validate() const;  ///< throws InvalidInput on inconsistent shapes
};

double lsq_objective(const BilinearLSQ& p);

/// The residual-derived factor: (A x - b) as a length-M vector.
Eigen::VectorXd lsq_ghat(const BilinearLSQ& p);

/// d/dA of the objective: (A x - b) x^T + 2 * dense_reg_weight * A.
Eigen::MatrixXd lsq_grad_a(const BilinearLSQ& p);

/// d/dx of the objective: A^T (A x - b) + lambda * sign(x), sign(0) = 0.
Eigen::VectorXd lsq_grad_x(const BilinearLSQ& p);

}  // namespace cogd

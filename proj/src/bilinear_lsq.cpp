#include "cogd/bilinear_lsq.hpp"

#include "cogd/errors.hpp"

namespace cogd {

void BilinearLSQ::validate() const {
  if (a_matrix.rows() != b_obs.size())
    throw InvalidInput("BilinearLSQ: A rows must match b length");
  if (a_matrix.cols() != x_vector.size())
    throw InvalidInput("BilinearLSQ: A cols must match x length");
  if (lambda_sparse < 0) throw InvalidInput("BilinearLSQ: lambda must be >= 0");
  if (dense_reg_weight < 0)
    throw InvalidInput("BilinearLSQ: dense_reg_weight must be >= 0");
}

double lsq_objective(const BilinearLSQ& p) {
  p.validate();
  const Eigen::VectorXd residual = p.a_matrix * p.x_vector - p.b_obs;
  return 0.5 * residual.squaredNorm() +
         p.lambda_sparse * p.x_vector.lpNorm<1>() +
         p.dense_reg_weight * p.a_matrix.squaredNorm();
}

Eigen::VectorXd lsq_ghat(const BilinearLSQ& p) {
  p.validate();
  return p.a_matrix * p.x_vector - p.b_obs;
}

Eigen::MatrixXd lsq_grad_a(const BilinearLSQ& p) {
  p.validate();
  const Eigen::VectorXd residual = p.a_matrix * p.x_vector - p.b_obs;
  return residual * p.x_vector.transpose() +
         2.0 * p.dense_reg_weight * p.a_matrix;
}

Eigen::VectorXd lsq_grad_x(const BilinearLSQ& p) {
  p.validate();
  const Eigen::VectorXd residual = p.a_matrix * p.x_vector - p.b_obs;
  Eigen::VectorXd grad = p.a_matrix.transpose() * residual;
  for (Eigen::Index j = 0; j < grad.size(); ++j)
    grad[j] += p.lambda_sparse * sign0(p.x_vector[j]);
  return grad;
}

}  // namespace cogd

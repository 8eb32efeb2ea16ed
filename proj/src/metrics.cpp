#include "cogd/metrics.hpp"

#include <cmath>

#include "cogd/errors.hpp"

namespace cogd {

std::optional<double> psnr(const Eigen::ArrayXXd& clean,
                           const Eigen::ArrayXXd& test, double max_value) {
  if (clean.rows() != test.rows() || clean.cols() != test.cols())
    throw InvalidInput("psnr: image shapes differ");
  if (clean.size() == 0) throw InvalidInput("psnr: empty image");
  if (max_value <= 0) throw InvalidInput("psnr: max_value must be > 0");
  const double mse = (clean - test).square().mean();
  if (mse == 0.0) return std::nullopt;
  return 10.0 * std::log10(max_value * max_value / mse);
}

double ssim(const Eigen::ArrayXXd& a, const Eigen::ArrayXXd& b,
            double max_value, int window) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput("ssim: image shapes differ");
  if (window < 1) throw InvalidInput("ssim: window must be >= 1");
  if (window > a.rows() || window > a.cols())
    throw InvalidInput("ssim: window larger than image");
  if (max_value <= 0) throw InvalidInput("ssim: max_value must be > 0");

  const double c1 = (0.01 * max_value) * (0.01 * max_value);
  const double c2 = (0.03 * max_value) * (0.03 * max_value);
  const double n = static_cast<double>(window) * window;

  double total = 0.0;
  long count = 0;
  for (Eigen::Index r = 0; r + window <= a.rows(); ++r) {
    for (Eigen::Index c = 0; c + window <= a.cols(); ++c) {
      const auto wa = a.block(r, c, window, window);
      const auto wb = b.block(r, c, window, window);
      const double mu_a = wa.mean();
      const double mu_b = wb.mean();
      const double var_a = (wa - mu_a).square().sum() / n;
      const double var_b = (wb - mu_b).square().sum() / n;
      const double cov = ((wa - mu_a) * (wb - mu_b)).sum() / n;
      const double value = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                           ((mu_a * mu_a + mu_b * mu_b + c1) *
                            (var_a + var_b + c2));
      total += value;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace cogd

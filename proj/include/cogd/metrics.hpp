#pragma once

#include <Eigen/Dense>
#include <optional>

namespace cogd {

/// Peak signal-to-noise ratio in dB: 10 log10(MAX^2 / MSE).
/// Returns nullopt when the images are identical (MSE = 0), which has no
/// finite PSNR. Shape mismatch throws InvalidInput.
std::optional<double> psnr(const Eigen::ArrayXXd& clean,
                           const Eigen::ArrayXXd& test, double max_value);

/// Mean local structural similarity over sliding windows (uniform weights,
/// stride 1), with C1 = (0.01 MAX)^2 and C2 = (0.03 MAX)^2. Window means and
/// (co)variances are the biased sample statistics.
double ssim(const Eigen::ArrayXXd& a, const Eigen::ArrayXXd& b,
            double max_value, int window = 8);

}  // namespace cogd

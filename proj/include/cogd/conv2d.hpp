#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>

namespace cogd {

/// Circular (periodic-boundary) 2-D convolution of a small kernel with a
/// full-size map: out(p) = sum_q kernel(q) map((p - q) mod size). The kernel
/// support sits at non-negative offsets.
Eigen::ArrayXXd conv2_circular(const Eigen::ArrayXXd& kernel,
                               const Eigen::ArrayXXd& map);

/// Adjoint of conv2_circular with respect to the map (circular correlation):
/// out(r) = sum_q kernel(q) image((r + q) mod size).
Eigen::ArrayXXd conv2_adjoint_map(const Eigen::ArrayXXd& kernel,
                                  const Eigen::ArrayXXd& image);

/// Adjoint of conv2_circular with respect to the kernel: the kernel-sized
/// gradient block out(q) = sum_p map((p - q) mod size) image(p).
Eigen::ArrayXXd conv2_adjoint_kernel(const Eigen::ArrayXXd& map,
                                     const Eigen::ArrayXXd& image,
                                     int kernel_rows, int kernel_cols);

using ArrayXXcd = Eigen::Array<std::complex<double>, Eigen::Dynamic,
                               Eigen::Dynamic>;

/// Real 2-D FFT pair with cached plans for one fixed map size. Forward
/// returns the half-spectrum (rows x (cols/2 + 1)); inverse normalizes.
/// Instances are not thread-safe (shared work buffers).
class Fft2 {
 public:
  Fft2(int rows, int cols);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  ArrayXXcd forward(const Eigen::ArrayXXd& in) const;
  Eigen::ArrayXXd inverse(const ArrayXXcd& in) const;

  /// Forward transform of a small kernel zero-padded into the map size with
  /// its support at the origin. Matches conv2_circular's convention, so
  /// conv = inverse(kernel_forward(k) * forward(x)).
  ArrayXXcd kernel_forward(const Eigen::ArrayXXd& kernel) const;

  int rows() const { return rows_; }
  int cols() const { return cols_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int rows_, cols_;
};

}  // namespace cogd

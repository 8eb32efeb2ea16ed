#include "cogd/conv2d.hpp"

#include <fftw3.h>

#include "cogd/errors.hpp"

namespace cogd {

namespace {

inline Eigen::Index wrap(Eigen::Index i, Eigen::Index n) {
  i %= n;
  return i < 0 ? i + n : i;
}

void check_kernel(const Eigen::ArrayXXd& kernel, const Eigen::ArrayXXd& map) {
  if (kernel.rows() > map.rows() || kernel.cols() > map.cols())
    throw InvalidInput("conv2: kernel larger than map");
  if (kernel.size() == 0 || map.size() == 0)
    throw InvalidInput("conv2: empty input");
}

}  // namespace

Eigen::ArrayXXd conv2_circular(const Eigen::ArrayXXd& kernel,
                               const Eigen::ArrayXXd& map) {
  check_kernel(kernel, map);
  const Eigen::Index rows = map.rows(), cols = map.cols();
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(rows, cols);
  for (Eigen::Index qr = 0; qr < kernel.rows(); ++qr) {
    for (Eigen::Index qc = 0; qc < kernel.cols(); ++qc) {
      const double k = kernel(qr, qc);
      if (k == 0.0) continue;
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index sr = wrap(r - qr, rows);
        for (Eigen::Index c = 0; c < cols; ++c) {
          out(r, c) += k * map(sr, wrap(c - qc, cols));
        }
      }
    }
  }
  return out;
}

Eigen::ArrayXXd conv2_adjoint_map(const Eigen::ArrayXXd& kernel,
                                  const Eigen::ArrayXXd& image) {
  check_kernel(kernel, image);
  const Eigen::Index rows = image.rows(), cols = image.cols();
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(rows, cols);
  for (Eigen::Index qr = 0; qr < kernel.rows(); ++qr) {
    for (Eigen::Index qc = 0; qc < kernel.cols(); ++qc) {
      const double k = kernel(qr, qc);
      if (k == 0.0) continue;
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index sr = wrap(r + qr, rows);
        for (Eigen::Index c = 0; c < cols; ++c) {
          out(r, c) += k * image(sr, wrap(c + qc, cols));
        }
      }
    }
  }
  return out;
}

Eigen::ArrayXXd conv2_adjoint_kernel(const Eigen::ArrayXXd& map,
                                     const Eigen::ArrayXXd& image,
                                     int kernel_rows, int kernel_cols) {
  if (map.rows() != image.rows() || map.cols() != image.cols())
    throw InvalidInput("conv2_adjoint_kernel: map and image shapes differ");
  const Eigen::Index rows = map.rows(), cols = map.cols();
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(kernel_rows, kernel_cols);
  for (Eigen::Index qr = 0; qr < kernel_rows; ++qr) {
    for (Eigen::Index qc = 0; qc < kernel_cols; ++qc) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index sr = wrap(r - qr, rows);
        for (Eigen::Index c = 0; c < cols; ++c) {
          acc += map(sr, wrap(c - qc, cols)) * image(r, c);
        }
      }
      out(qr, qc) = acc;
    }
  }
  return out;
}

struct Fft2::Impl {
  double* real = nullptr;
  fftw_complex* freq = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

Fft2::Fft2(int rows, int cols)
    : impl_(std::make_unique<Impl>()), rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw InvalidInput("Fft2: size must be positive");
  impl_->real = fftw_alloc_real(static_cast<std::size_t>(rows) * cols);
  impl_->freq =
      fftw_alloc_complex(static_cast<std::size_t>(rows) * (cols / 2 + 1));
  // FFTW_ESTIMATE keeps planning deterministic and leaves the buffers intact.
  impl_->fwd = fftw_plan_dft_r2c_2d(rows, cols, impl_->real, impl_->freq,
                                    FFTW_ESTIMATE);
  impl_->inv = fftw_plan_dft_c2r_2d(rows, cols, impl_->freq, impl_->real,
                                    FFTW_ESTIMATE);
}

Fft2::~Fft2() {
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->inv) fftw_destroy_plan(impl_->inv);
  if (impl_->real) fftw_free(impl_->real);
  if (impl_->freq) fftw_free(impl_->freq);
}

ArrayXXcd Fft2::forward(const Eigen::ArrayXXd& in) const {
  if (in.rows() != rows_ || in.cols() != cols_)
    throw InvalidInput("Fft2::forward: shape mismatch");
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) impl_->real[r * cols_ + c] = in(r, c);
  fftw_execute(impl_->fwd);
  const int fcols = cols_ / 2 + 1;
  ArrayXXcd out(rows_, fcols);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < fcols; ++c)
      out(r, c) = std::complex<double>(impl_->freq[r * fcols + c][0],
                                       impl_->freq[r * fcols + c][1]);
  return out;
}

Eigen::ArrayXXd Fft2::inverse(const ArrayXXcd& in) const {
  const int fcols = cols_ / 2 + 1;
  if (in.rows() != rows_ || in.cols() != fcols)
    throw InvalidInput("Fft2::inverse: shape mismatch");
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < fcols; ++c) {
      impl_->freq[r * fcols + c][0] = in(r, c).real();
      impl_->freq[r * fcols + c][1] = in(r, c).imag();
    }
  }
  fftw_execute(impl_->inv);
  const double scale = 1.0 / (static_cast<double>(rows_) * cols_);
  Eigen::ArrayXXd out(rows_, cols_);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c)
      out(r, c) = impl_->real[r * cols_ + c] * scale;
  return out;
}

ArrayXXcd Fft2::kernel_forward(const Eigen::ArrayXXd& kernel) const {
  if (kernel.rows() > rows_ || kernel.cols() > cols_)
    throw InvalidInput("Fft2::kernel_forward: kernel larger than map");
  Eigen::ArrayXXd padded = Eigen::ArrayXXd::Zero(rows_, cols_);
  padded.block(0, 0, kernel.rows(), kernel.cols()) = kernel;
  return forward(padded);
}

}  // namespace cogd

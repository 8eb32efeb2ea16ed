#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cogd/conv2d.hpp"
#include "cogd/coupling.hpp"
#include "cogd/rng.hpp"
#include "cogd/run_record.hpp"

namespace cogd {

/// K convolution kernels, each dim x dim, constrained to the unit L2 ball.
struct FilterBank {
  std::vector<Eigen::ArrayXXd> filters;

  int count() const { return static_cast<int>(filters.size()); }
  int dim() const { return filters.empty() ? 0 : static_cast<int>(filters[0].rows()); }

  /// Random kernels projected into the unit ball.
  static FilterBank random_feasible(int count, int dim, Rng& rng);
};

/// K coefficient maps, each sized like the image.
struct CodeMaps {
  std::vector<Eigen::ArrayXXd> codes;

  int count() const { return static_cast<int>(codes.size()); }
  static CodeMaps zeros(int count, Eigen::Index rows, Eigen::Index cols);
};

struct CSCProblem {
  Eigen::ArrayXXd image;  ///< observations b (values at masked-out pixels are ignored)
  Eigen::ArrayXXd mask;   ///< binary {0,1}, same shape; all ones = plain reconstruction
  double lambda_sparse = 0.05;
  double admm_penalty = 1.0;  ///< rho
  int max_outer_iters = 20;
  int inner_passes = 1;  ///< ADMM passes per code/kernel update call
  int cg_max_iters = 120;
  double cg_tol = 1e-10;

  void validate() const;
  bool full_mask() const;
};

struct CscObjective {
  double data = 0.0;      ///< 1/2 || mask .* (b - reconstruction) ||_F^2
  double sparsity = 0.0;  ///< lambda sum_k ||x_k||_1
  bool feasible = true;   ///< unit-ball indicator satisfied on every kernel
  double total() const { return data + sparsity; }
};

CscObjective csc_objective(const CSCProblem& p, const FilterBank& fb,
                           const CodeMaps& cm);

/// Soft thresholding, the proximal map of t * ||.||_1.
Eigen::ArrayXXd prox_l1(const Eigen::ArrayXXd& v, double threshold);
Eigen::VectorXd prox_l1(const Eigen::VectorXd& v, double threshold);

/// Radial projection onto the unit L2 ball.
Eigen::ArrayXXd prox_unit_ball(const Eigen::ArrayXXd& kernel);

/// sum_k filter_k (*) code_k over the full support.
Eigen::ArrayXXd reconstruct(const FilterBank& fb, const CodeMaps& cm);

/// Alternating proximal-ADMM solver for convolutional sparse coding with
/// per-filter coupled backtracking of the code maps.
///
/// Each outer epoch runs the backtracking gate (once per coupling period),
/// then one kernel update and one code update, each a configurable number of
/// ADMM passes. Quadratic sub-steps are solved in the frequency domain when
/// the mask is full and by conjugate gradients otherwise. Kernels reported
/// by filters() are always feasible. Not shareable across threads.
class CscSolver {
 public:
  CscSolver(CSCProblem problem, FilterBank initial_filters,
            CouplingConfig coupling = CouplingConfig{}, double eta2 = 1.0);

  void code_update();
  void kernel_update();

  /// Per-filter CoGD backtracking of the code maps. alpha_x is the mean of
  /// the per-filter code L1 norms; alpha_A the median of the kernel norms.
  /// Returns the number of gates fired by this call.
  int backtrack_codes(std::int64_t epoch);

  /// Runs the full alternating loop, appending one row per epoch to record.
  /// Throws NumericError on solver breakdown; record keeps the rows
  /// produced so far, so the caller can persist the partial trace.
  void solve(RunRecord& record);

  const FilterBank& filters() const { return filters_; }
  const CodeMaps& codes() const { return codes_; }
  const CSCProblem& problem() const { return p_; }
  Eigen::ArrayXXd reconstruction() const;
  std::int64_t gate_fires() const { return fires_; }

  /// Warm-starts the primal code maps (the ADMM splits are untouched).
  void set_codes(CodeMaps codes);

  /// ADMM split state, exposed for diagnostics.
  const CodeMaps& code_split() const { return code_split_; }
  const CodeMaps& code_dual() const { return code_dual_; }

  /// Augmented Lagrangian of the code sub-problem at the current duals.
  double augmented_lagrangian_codes() const;

 private:
  void solve_code_quadratic();
  void solve_kernel_quadratic();
  void refresh_filter_ffts();
  Eigen::ArrayXXd masked_residual() const;
  void refresh_snapshot();

  CSCProblem p_;
  FilterBank filters_;  // feasible kernels (the projected split variable)
  std::vector<Eigen::ArrayXXd> kernel_primal_;
  std::vector<Eigen::ArrayXXd> kernel_dual_;
  CodeMaps codes_;  // primal x
  CodeMaps code_split_;
  CodeMaps code_dual_;
  CouplingConfig coupling_;
  double eta2_;

  CodeMaps snap_codes_;
  FilterBank snap_filters_;
  Eigen::VectorXd snap_agg_;
  std::int64_t fires_ = 0;

  Fft2 fft_;
  std::vector<ArrayXXcd> filter_fft_;
  bool filter_fft_valid_ = false;
};

/// Code-only inference against fixed filters (the inpainting sub-problem):
/// runs the given number of code ADMM passes from zero codes.
CodeMaps infer_codes(const CSCProblem& p, const FilterBank& fb, int passes);

/// Reconstructs the full image from fixed learned filters by solving the
/// codes on the observed pixels only.
Eigen::ArrayXXd inpaint(const CSCProblem& p, const FilterBank& fb, int passes);

}  // namespace cogd

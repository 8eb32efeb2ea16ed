#include "cogd/csc.hpp"

#include <algorithm>
#include <cmath>

#include "cogd/errors.hpp"

namespace cogd {

namespace {

constexpr double kFeasibilitySlack = 1e-9;

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) throw InvalidInput("median of empty set");
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

using Stack = std::vector<Eigen::ArrayXXd>;

double stack_dot(const Stack& a, const Stack& b) {
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) total += (a[k] * b[k]).sum();
  return total;
}

/// Conjugate gradients on a positive-definite stacked-map operator.
template <typename Apply>
void conjugate_gradient(const Apply& apply, const Stack& rhs, Stack& x,
                        int max_iters, double tol) {
  Stack r = apply(x);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = rhs[k] - r[k];
  Stack p = r;
  double rs = stack_dot(r, r);
  const double target = tol * std::sqrt(std::max(stack_dot(rhs, rhs), 1e-300));
  for (int it = 0; it < max_iters && std::sqrt(rs) > target; ++it) {
    const Stack ap = apply(p);
    const double denom = stack_dot(p, ap);
    if (denom <= 0.0 || !std::isfinite(denom)) break;
    const double alpha = rs / denom;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
    }
    const double rs_next = stack_dot(r, r);
    for (std::size_t k = 0; k < p.size(); ++k)
      p[k] = r[k] + (rs_next / rs) * p[k];
    rs = rs_next;
  }
}

}  // namespace

FilterBank FilterBank::random_feasible(int count, int dim, Rng& rng) {
  if (count < 1 || dim < 1)
    throw InvalidInput("FilterBank: count and dim must be positive");
  FilterBank fb;
  fb.filters.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Eigen::ArrayXXd f(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) f(r, c) = rng.normal();
    fb.filters.push_back(prox_unit_ball(f));
  }
  return fb;
}

CodeMaps CodeMaps::zeros(int count, Eigen::Index rows, Eigen::Index cols) {
  CodeMaps cm;
  cm.codes.assign(static_cast<std::size_t>(count),
                  Eigen::ArrayXXd::Zero(rows, cols));
  return cm;
}

void CSCProblem::validate() const {
  if (image.size() == 0) throw InvalidInput("CSCProblem: empty image");
  if (mask.rows() != image.rows() || mask.cols() != image.cols())
    throw InvalidInput("CSCProblem: mask shape must match image");
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double m = mask.data()[i];
    if (m != 0.0 && m != 1.0)
      throw InvalidInput("CSCProblem: mask entries must be 0 or 1");
  }
  if (lambda_sparse < 0) throw InvalidInput("CSCProblem: lambda must be >= 0");
  if (admm_penalty <= 0) throw InvalidInput("CSCProblem: rho must be > 0");
  if (max_outer_iters < 1 || inner_passes < 1 || cg_max_iters < 1)
    throw InvalidInput("CSCProblem: iteration counts must be >= 1");
}

bool CSCProblem::full_mask() const {
  return (mask == 1.0).all();
}

CscObjective csc_objective(const CSCProblem& p, const FilterBank& fb,
                           const CodeMaps& cm) {
  p.validate();
  if (fb.count() != cm.count())
    throw InvalidInput("csc_objective: filter and code counts differ");
  CscObjective obj;
  const Eigen::ArrayXXd recon = reconstruct(fb, cm);
  obj.data = 0.5 * (p.mask * (p.image - recon)).square().sum();
  for (const auto& code : cm.codes)
    obj.sparsity += p.lambda_sparse * code.abs().sum();
  for (const auto& f : fb.filters) {
    if (f.square().sum() > 1.0 + kFeasibilitySlack) obj.feasible = false;
  }
  return obj;
}

Eigen::ArrayXXd prox_l1(const Eigen::ArrayXXd& v, double threshold) {
  if (threshold < 0) throw InvalidInput("prox_l1: threshold must be >= 0");
  return v.sign() * (v.abs() - threshold).max(0.0);
}

Eigen::VectorXd prox_l1(const Eigen::VectorXd& v, double threshold) {
  if (threshold < 0) throw InvalidInput("prox_l1: threshold must be >= 0");
  return (v.array().sign() * (v.array().abs() - threshold).max(0.0)).matrix();
}

Eigen::ArrayXXd prox_unit_ball(const Eigen::ArrayXXd& kernel) {
  const double sq = kernel.square().sum();
  // the slack absorbs roundoff from a previous projection, making the
  // operator idempotent
  if (sq <= 1.0 + 1e-12) return kernel;
  return kernel / std::sqrt(sq);
}

Eigen::ArrayXXd reconstruct(const FilterBank& fb, const CodeMaps& cm) {
  if (fb.count() != cm.count() || cm.count() == 0)
    throw InvalidInput("reconstruct: filter and code counts differ");
  Eigen::ArrayXXd out =
      Eigen::ArrayXXd::Zero(cm.codes[0].rows(), cm.codes[0].cols());
  for (int k = 0; k < fb.count(); ++k)
    out += conv2_circular(fb.filters[k], cm.codes[k]);
  return out;
}

CscSolver::CscSolver(CSCProblem problem, FilterBank initial_filters,
                     CouplingConfig coupling, double eta2)
    : p_(std::move(problem)),
      filters_(std::move(initial_filters)),
      coupling_(coupling),
      eta2_(eta2),
      fft_(static_cast<int>(p_.image.rows()), static_cast<int>(p_.image.cols())) {
  p_.validate();
  coupling_.validate();
  if (filters_.count() < 1) throw InvalidInput("CscSolver: no filters");
  if (eta2_ <= 0) throw InvalidInput("CscSolver: eta2 must be > 0");
  for (auto& f : filters_.filters) {
    // incoming kernels are projected so the feasibility invariant holds
    // from the first epoch
    f = prox_unit_ball(f);
  }
  const int k = filters_.count();
  codes_ = CodeMaps::zeros(k, p_.image.rows(), p_.image.cols());
  code_split_ = codes_;
  code_dual_ = codes_;
  kernel_primal_ = filters_.filters;
  kernel_dual_.assign(static_cast<std::size_t>(k),
                      Eigen::ArrayXXd::Zero(filters_.dim(), filters_.dim()));
  refresh_snapshot();
}

void CscSolver::refresh_snapshot() {
  snap_codes_ = codes_;
  snap_filters_ = filters_;
  snap_agg_.resize(filters_.count());
  for (int k = 0; k < filters_.count(); ++k)
    snap_agg_[k] = codes_.codes[k].abs().sum();
}

Eigen::ArrayXXd CscSolver::reconstruction() const {
  return reconstruct(filters_, codes_);
}

void CscSolver::set_codes(CodeMaps codes) {
  if (codes.count() != filters_.count())
    throw InvalidInput("set_codes: map count does not match filters");
  for (const auto& code : codes.codes) {
    if (code.rows() != p_.image.rows() || code.cols() != p_.image.cols())
      throw InvalidInput("set_codes: map shape does not match image");
  }
  codes_ = std::move(codes);
}

Eigen::ArrayXXd CscSolver::masked_residual() const {
  return p_.mask * (reconstruction() - p_.image);
}

void CscSolver::refresh_filter_ffts() {
  filter_fft_.clear();
  filter_fft_.reserve(filters_.filters.size());
  for (const auto& f : filters_.filters)
    filter_fft_.push_back(fft_.kernel_forward(f));
  filter_fft_valid_ = true;
}

void CscSolver::solve_code_quadratic() {
  const double rho = p_.admm_penalty;
  const int count = filters_.count();
  if (p_.full_mask()) {
    if (!filter_fft_valid_) refresh_filter_ffts();
    const ArrayXXcd b_hat = fft_.forward(p_.image);
    std::vector<ArrayXXcd> rhs_hat(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      rhs_hat[k] = filter_fft_[k].conjugate() * b_hat +
                   rho * fft_.forward(code_split_.codes[k] -
                                      code_dual_.codes[k]);
    }
    // Rank-one plus rho*I per frequency bin; Sherman-Morrison inverse.
    ArrayXXcd weighted = ArrayXXcd::Zero(rhs_hat[0].rows(), rhs_hat[0].cols());
    Eigen::ArrayXXd norm2 =
        Eigen::ArrayXXd::Zero(rhs_hat[0].rows(), rhs_hat[0].cols());
    for (int k = 0; k < count; ++k) {
      weighted += filter_fft_[k] * rhs_hat[k];
      norm2 += filter_fft_[k].abs2();
    }
    const ArrayXXcd scale = weighted / (norm2 + rho).cast<std::complex<double>>();
    for (int k = 0; k < count; ++k) {
      const ArrayXXcd x_hat =
          (rhs_hat[k] - filter_fft_[k].conjugate() * scale) / rho;
      codes_.codes[k] = fft_.inverse(x_hat);
    }
    return;
  }

  const Eigen::ArrayXXd masked_b = p_.mask * p_.image;
  Stack rhs(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    rhs[k] = conv2_adjoint_map(filters_.filters[k], masked_b) +
             rho * (code_split_.codes[k] - code_dual_.codes[k]);
  }
  const auto apply = [&](const Stack& x) {
    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(p_.image.rows(), p_.image.cols());
    for (int k = 0; k < count; ++k)
      sum += conv2_circular(filters_.filters[k], x[k]);
    sum *= p_.mask;
    Stack out(x.size());
    for (int k = 0; k < count; ++k)
      out[k] = conv2_adjoint_map(filters_.filters[k], sum) + rho * x[k];
    return out;
  };
  conjugate_gradient(apply, rhs, codes_.codes, p_.cg_max_iters, p_.cg_tol);
}

void CscSolver::solve_kernel_quadratic() {
  const double rho = p_.admm_penalty;
  const int count = filters_.count();
  const int dim = filters_.dim();
  const Eigen::ArrayXXd masked_b = p_.mask * p_.image;
  Stack rhs(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    rhs[k] = conv2_adjoint_kernel(codes_.codes[k], masked_b, dim, dim) +
             rho * (filters_.filters[k] - kernel_dual_[k]);
  }
  const auto apply = [&](const Stack& a) {
    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(p_.image.rows(), p_.image.cols());
    for (int k = 0; k < count; ++k)
      sum += conv2_circular(a[k], codes_.codes[k]);
    sum *= p_.mask;
    Stack out(a.size());
    for (int k = 0; k < count; ++k)
      out[k] = conv2_adjoint_kernel(codes_.codes[k], sum, dim, dim) +
               rho * a[k];
    return out;
  };
  conjugate_gradient(apply, rhs, kernel_primal_, p_.cg_max_iters, p_.cg_tol);
}

void CscSolver::code_update() {
  const double threshold = p_.lambda_sparse / p_.admm_penalty;
  for (int pass = 0; pass < p_.inner_passes; ++pass) {
    solve_code_quadratic();
    for (int k = 0; k < filters_.count(); ++k) {
      code_split_.codes[k] =
          prox_l1(Eigen::ArrayXXd(codes_.codes[k] + code_dual_.codes[k]),
                  threshold);
      code_dual_.codes[k] += codes_.codes[k] - code_split_.codes[k];
    }
  }
  for (const auto& code : codes_.codes) {
    if (!code.isFinite().all())
      throw NumericError("code update produced non-finite values");
  }
}

void CscSolver::kernel_update() {
  for (int pass = 0; pass < p_.inner_passes; ++pass) {
    solve_kernel_quadratic();
    for (int k = 0; k < filters_.count(); ++k) {
      filters_.filters[k] =
          prox_unit_ball(kernel_primal_[k] + kernel_dual_[k]);
      kernel_dual_[k] += kernel_primal_[k] - filters_.filters[k];
    }
  }
  filter_fft_valid_ = false;
  for (const auto& f : filters_.filters) {
    if (!f.isFinite().all())
      throw NumericError("kernel update produced non-finite values");
  }
}

double CscSolver::augmented_lagrangian_codes() const {
  const double rho = p_.admm_penalty;
  double value = 0.5 * masked_residual().square().sum();
  for (int k = 0; k < filters_.count(); ++k) {
    value += p_.lambda_sparse * code_split_.codes[k].abs().sum();
    value += 0.5 * rho *
             (codes_.codes[k] - code_split_.codes[k] + code_dual_.codes[k])
                 .square()
                 .sum();
  }
  return value;
}

int CscSolver::backtrack_codes(std::int64_t epoch) {
  if (!coupling_.enabled || epoch % coupling_.period != 0) return 0;

  const int count = filters_.count();
  const int dim = filters_.dim();
  Eigen::VectorXd agg(count);
  std::vector<double> kernel_norms(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    agg[k] = codes_.codes[k].abs().sum();
    kernel_norms[k] = std::sqrt(filters_.filters[k].square().sum());
  }
  const double alpha_x = agg.mean();
  const double alpha_a = median(kernel_norms);

  int fired = 0;
  Eigen::ArrayXXd residual;
  for (int k = 0; k < count; ++k) {
    const bool sparse_small = !(agg[k] >= alpha_x);
    const bool dense_large = kernel_norms[k] >= alpha_a;
    if (!(sparse_small && dense_large)) continue;
    ++fired;
    ++fires_;
    if (coupling_.beta_scale == 0.0) continue;
    if (residual.size() == 0) residual = masked_residual();

    // Per-filter aggregates: the sparse coordinate is ||x_k||_1, the dense
    // column the kernel coefficients, and ghat the data gradient for this
    // kernel with the code mass divided out.
    const Eigen::MatrixXd a_curr = Eigen::Map<const Eigen::MatrixXd>(
        filters_.filters[k].data(), dim * dim, 1);
    const Eigen::MatrixXd a_prev = Eigen::Map<const Eigen::MatrixXd>(
        snap_filters_.filters[k].data(), dim * dim, 1);
    const Eigen::MatrixXd response = finite_difference_coupling(
        a_curr, a_prev, Eigen::VectorXd::Constant(1, agg[k]),
        Eigen::VectorXd::Constant(1, snap_agg_[k]), coupling_.zero_guard);
    Eigen::ArrayXXd grad_block =
        conv2_adjoint_kernel(codes_.codes[k], residual, dim, dim);
    if (std::abs(agg[k]) >= coupling_.zero_guard) grad_block /= agg[k];
    const Eigen::VectorXd ghat = Eigen::Map<const Eigen::VectorXd>(
        grad_block.data(), grad_block.size());
    const Eigen::VectorXd c =
        coupling_coefficient(ghat, response, coupling_.kernel_exponent);
    const double beta = coupling_.beta_scale * eta2_ * c[0];
    codes_.codes[k] += beta * snap_codes_.codes[k];
  }
  refresh_snapshot();
  return fired;
}

void CscSolver::solve(RunRecord& record) {
  record.set_columns({"epoch", "objective", "data_term", "sparsity_term",
                      "code_l1_mean", "filter_norm_mean", "gate_fires"});
  for (int epoch = 1; epoch <= p_.max_outer_iters; ++epoch) {
    const int fired = backtrack_codes(epoch);
    kernel_update();
    code_update();
    const CscObjective obj = csc_objective(p_, filters_, codes_);
    double code_l1 = 0.0, filter_norm = 0.0;
    for (int k = 0; k < filters_.count(); ++k) {
      code_l1 += codes_.codes[k].abs().sum();
      filter_norm += std::sqrt(filters_.filters[k].square().sum());
    }
    code_l1 /= filters_.count();
    filter_norm /= filters_.count();
    record.add_row({static_cast<double>(epoch), obj.total(), obj.data,
                    obj.sparsity, code_l1, filter_norm,
                    static_cast<double>(fired)});
    if (!std::isfinite(obj.total()))
      throw NumericError("csc objective diverged at epoch " +
                         std::to_string(epoch));
  }
  record.set_summary("final_objective",
                     record.rows().empty() ? 0.0 : record.rows().back()[1]);
  record.set_summary("gate_fires_total", static_cast<double>(fires_));
}

CodeMaps infer_codes(const CSCProblem& p, const FilterBank& fb, int passes) {
  if (passes < 1) throw InvalidInput("infer_codes: passes must be >= 1");
  CouplingConfig off;
  off.enabled = false;
  CSCProblem sub = p;
  sub.inner_passes = 1;
  CscSolver solver(sub, fb, off);
  for (int i = 0; i < passes; ++i) solver.code_update();
  return solver.codes();
}

Eigen::ArrayXXd inpaint(const CSCProblem& p, const FilterBank& fb,
                        int passes) {
  const CodeMaps cm = infer_codes(p, fb, passes);
  return reconstruct(fb, cm);
}

}  // namespace cogd

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "cogd/coupling.hpp"
#include "cogd/optimizer.hpp"
#include "cogd/rng.hpp"
#include "cogd/run_record.hpp"

namespace cogd {

struct NormParams {
  Eigen::VectorXd gamma;  ///< learnable scale per unit
  Eigen::VectorXd shift;  ///< learnable additive parameter per unit
  double epsilon = 1e-5;
};

/// One fully connected layer with a soft per-unit output mask, optional
/// batch normalization, and an optional rectifier.
struct LinearLayer {
  Eigen::MatrixXd weight;  ///< out x in; row j feeds output unit j
  Eigen::VectorXd mask;    ///< length out
  bool has_norm = false;
  NormParams norm;
  bool has_activation = true;
  bool prunable = true;  ///< mask penalty, gates and pruning apply here

  int in_features() const { return static_cast<int>(weight.cols()); }
  int out_features() const { return static_cast<int>(weight.rows()); }
};

struct TinyNet {
  std::vector<LinearLayer> layers;

  int input_dim() const { return layers.front().in_features(); }
  int output_dim() const { return layers.back().out_features(); }
  void validate() const;
};

enum class MaskInit { Ones, Normal, AbsNormal };

struct TinyNetSpec {
  int input_dim = 16;
  std::vector<int> hidden{32, 32};
  int output_dim = 4;
  bool hidden_norm = false;
  MaskInit mask_init = MaskInit::AbsNormal;
};

TinyNet make_tinynet(const TinyNetSpec& spec, Rng& rng);

/// Batch normalization over rows (samples): per unit column,
/// (x - mu) / sqrt(var + eps) * gamma + shift with the biased variance.
/// Needs at least two samples.
Eigen::MatrixXd norm_forward(const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& gamma,
                             const Eigen::VectorXd& shift, double epsilon);

/// Everything the forward pass recorded, enough to produce gradients for
/// exactly the parameters that were touched.
struct GradientTape {
  std::vector<Eigen::MatrixXd> inputs;  // batch entering each layer
  std::vector<Eigen::MatrixXd> linear;  // W h, before the mask
  std::vector<Eigen::MatrixXd> masked;  // (W h) .* m, before normalization
  std::vector<Eigen::MatrixXd> normed;  // pre-activation values
  std::vector<Eigen::MatrixXd> xhat;    // normalized activations (norm layers)
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::VectorXd> var;
  Eigen::MatrixXd output;
};

/// Forward pass; batch rows are samples. Records the tape when given.
Eigen::MatrixXd forward_masked(const TinyNet& net, const Eigen::MatrixXd& batch,
                               GradientTape* tape = nullptr);

struct TapeGrads {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> mask;
  std::vector<Eigen::VectorXd> gamma;
  std::vector<Eigen::VectorXd> shift;
};

/// Reverse pass from the loss gradient at the network output.
TapeGrads backward(const TinyNet& net, const GradientTape& tape,
                   const Eigen::MatrixXd& dloss_doutput);

struct ToyLossTerms {
  double data = 0.0;       ///< mean squared error over all outputs
  double mask_l1 = 0.0;    ///< lambda_mask * sum ||m||_1 over prunable layers
  double weight_l1 = 0.0;  ///< lambda_weight_l1 * elementwise ||W||_1
  double weight_l2 = 0.0;  ///< weight_reg * ||W||_F^2
  double total() const { return data + mask_l1 + weight_l1 + weight_l2; }
};

ToyLossTerms toy_loss_terms(const TinyNet& net, const Eigen::MatrixXd& pred,
                            const Eigen::MatrixXd& targets, double lambda_mask,
                            double weight_reg, double lambda_weight_l1 = 0.0);

/// Data loss + lambda ||m||_1 + weight_reg ||W||_F^2, evaluated end to end.
double pruning_loss(const TinyNet& net, const Eigen::MatrixXd& batch,
                    const Eigen::MatrixXd& targets, double lambda_mask,
                    double weight_reg);

struct GhatResult {
  bool guard_needed = false;  ///< divisor below the zero guard
  Eigen::VectorXd ghat;       ///< weight-row gradient / m_j (empty when guarded)
};

/// The residual-derived factor for the pruning coupling.
GhatResult ghat_pruning(const Eigen::VectorXd& weight_row_grad, double m_j,
                        double zero_guard = 1e-8);

/// Marks the ceil-rounded top fraction of stats (value descending, ties by
/// ascending index). fraction 0 marks nothing, 1 everything.
std::vector<bool> top_fraction_selection(const Eigen::VectorXd& stats,
                                         double fraction);

/// Parameter values at the last backtrack point.
struct ToySnapshot {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> masks;
  std::vector<Eigen::VectorXd> gammas;
};

ToySnapshot snapshot_of(const TinyNet& net);

/// Per-unit CoGD update of the soft masks: fires when |m_j| is below
/// alpha_sparse while row j is in the top (1 - a) fraction by norm. The net
/// holds the post-step parameters; the snapshot the previous period's.
/// Returns per-layer fire counts.
std::vector<int> cogd_mask_update(TinyNet& net, const TapeGrads& epoch_grads,
                                  const CouplingConfig& cfg,
                                  const ToySnapshot& snap, double quantile_a,
                                  double eta2);

/// Per-unit CoGD backtracking of weight rows via the normalization scales:
/// fires when |gamma_j| is outside the top (1 - a) fraction while row j is
/// inside it. Returns per-layer fire counts.
std::vector<int> cogd_weight_backtrack(TinyNet& net,
                                       const TapeGrads& epoch_grads,
                                       const CouplingConfig& cfg,
                                       const ToySnapshot& snap,
                                       double quantile_a, double eta2);

/// Number of (mask, weight row) pairs currently in the asynchronous state:
/// |m_j| < alpha_mask while row j sits in the top (1 - a) fraction by norm.
long asynchrony_count_masks(const TinyNet& net, double alpha_mask,
                            double quantile_a);

/// Same for (gamma, weight row) pairs under the quantile thresholds.
long asynchrony_count_gamma(const TinyNet& net, double quantile_a);

/// Sets masks with |m_j| < tau to exactly zero on prunable layers.
void apply_prune_threshold(TinyNet& net, double tau);

/// Removes zero-mask units of prunable layers (their weight rows, mask and
/// normalization entries, and the following layer's columns).
TinyNet remove_pruned_units(const TinyNet& net);

void save_model(const TinyNet& net, const std::filesystem::path& path);
TinyNet load_model(const std::filesystem::path& path);

struct TeacherDataset {
  Eigen::MatrixXd inputs;   // n x input_dim
  Eigen::MatrixXd targets;  // n x output_dim
};

enum class ToyVariant { Sgd, Cogd };

struct ToyTrainOptions {
  int epochs = 80;
  OptimizerOptions optimizer;  ///< defaults overridden by the caller
  CouplingConfig coupling;
  double lambda_mask = 0.1;
  double weight_reg = 0.0002;
  double lambda_weight_l1 = 0.0;
  double quantile_a = 0.5;
  bool train_masks = true;         ///< step the masks (off = masks stay fixed)
  bool update_masks = true;        ///< pruning-style mask backtracking
  bool update_weight_rows = false; ///< normalization-coupled row backtracking
  bool cosine_schedule = false;
  ToyVariant variant = ToyVariant::Cogd;
};

/// Full-batch epoch loop: forward with tape, reverse pass, optimizer steps,
/// then the CoGD updates once per coupling period. One row per epoch lands
/// in record; on a non-finite loss the rows so far are kept and
/// NumericError is thrown so the caller can persist the partial trace.
void train_toy(TinyNet& net, const TeacherDataset& data,
               const ToyTrainOptions& opts, RunRecord& record);

}  // namespace cogd

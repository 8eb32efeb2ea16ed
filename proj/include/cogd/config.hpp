#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cogd/coupling.hpp"
#include "cogd/optimizer.hpp"

namespace cogd {

inline constexpr const char* kVersionString = "cogd-0.1.0";

/// Flat, fully defaulted configuration for every experiment. Defaults are
/// experiment-specific (see default_config); parsing validates every field
/// against its domain and reports all violations, not just the first.
struct ExperimentConfig {
  std::string experiment = "beale";
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string variant = "cogd";  ///< "cogd" or "plain"

  CouplingConfig coupling;

  OptimizerOptions optimizer;
  double learning_rate_dense = 0.01;  ///< eta1; eta2 lives in optimizer

  // beale
  double beale_start_x1 = 1.0;
  double beale_start_x2 = 2.0;
  double beale_c1 = 1.5;
  double beale_c2 = 2.25;
  double beale_c3 = 2.625;
  double lr_sgd = 0.001;
  double lr_momentum = 0.005;
  double lr_adam = 0.1;
  int iterations = 200;

  // bilinear-lsq
  int lsq_rows = 12;
  int lsq_cols = 8;
  int lsq_true_nonzeros = 3;
  double lsq_lambda = 0.1;
  double lsq_dense_reg = 0.0;
  double lsq_noise = 0.01;

  // csc
  std::string image_path;  ///< empty = synthetic filter-composed image
  int csc_filters = 8;
  int csc_filter_size = 5;
  int csc_image_size = 32;
  double csc_lambda = 0.01;
  double csc_rho = 1.0;
  double csc_code_density = 0.02;
  int csc_outer_iters = 20;
  int csc_inner_passes = 1;
  int csc_inpaint_passes = 100;
  int csc_cg_iters = 120;
  double csc_cg_tol = 1e-10;
  double keep_fraction = 1.0;
  bool contrast_normalize_input = true;

  // deep toy
  int toy_input_dim = 16;
  int toy_hidden = 32;
  int toy_hidden_layers = 2;
  int toy_output_dim = 4;
  int toy_samples = 1000;
  int toy_epochs = 80;
  double toy_noise = 0.0;
  double lambda_mask = 0.05;
  double weight_reg = 0.0002;
  double lambda_weight_l1 = 0.0;
  double quantile_a = 0.5;
  std::string mask_init = "absnormal";  ///< ones | normal | absnormal
  bool cosine_schedule = false;

  bool cogd_enabled() const { return variant == "cogd"; }
};

struct ConfigIssue {
  int line = 0;  ///< 1-based; 0 for document-level issues
  std::string message;
};

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigIssue> issues;
  bool ok() const { return issues.empty() && config.has_value(); }
};

const std::vector<std::string>& experiment_names();

/// Experiment-specific defaults; throws InvalidInput for an unknown name.
ExperimentConfig default_config(const std::string& experiment);

/// Parses a line-oriented key=value document ('#' comments allowed).
/// Defaults come from the experiment named in the document.
ParseResult parse_config(const std::string& text);

/// Applies one key=value override; returns an error message or "".
std::string apply_override(ExperimentConfig& cfg, const std::string& key,
                           const std::string& value);

/// Every key, including defaults, one per line; parses back to an equal
/// config.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace cogd

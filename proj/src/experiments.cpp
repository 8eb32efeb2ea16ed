#include "cogd/experiments.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cogd/beale.hpp"
#include "cogd/bilinear_lsq.hpp"
#include "cogd/csc.hpp"
#include "cogd/errors.hpp"
#include "cogd/metrics.hpp"
#include "cogd/pgm.hpp"
#include "cogd/rng.hpp"
#include "cogd/run_record.hpp"
#include "cogd/synth.hpp"
#include "cogd/tinynet.hpp"

namespace cogd {

namespace {

/// Exclusive ownership of a run directory for the duration of a run.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir)
      : path_(dir / ".cogd-lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw IoError("output directory is locked by another run: " +
                    path_.string());
    ::close(fd);
  }
  ~DirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
};

RunRecord base_record(const ExperimentConfig& cfg) {
  RunRecord rec;
  rec.set_header("version", kVersionString);
  std::istringstream lines(serialize_config(cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos)
      rec.set_header(line.substr(0, eq), line.substr(eq + 1));
  }
  return rec;
}

double value_range(const Eigen::ArrayXXd& image) {
  const double range = image.maxCoeff() - image.minCoeff();
  return range > 0 ? range : 1.0;
}

Eigen::ArrayXXd to_unit_range(const Eigen::ArrayXXd& image, double lo,
                              double range) {
  return ((image - lo) / range).min(1.0).max(0.0);
}

double psnr_or_inf(const Eigen::ArrayXXd& clean, const Eigen::ArrayXXd& test,
                   double max_value) {
  const auto value = psnr(clean, test, max_value);
  return value ? *value : std::numeric_limits<double>::infinity();
}

void run_beale_experiment(const ExperimentConfig& cfg,
                          const std::filesystem::path& dir) {
  BealeRunConfig run;
  run.start_x1 = cfg.beale_start_x1;
  run.start_x2 = cfg.beale_start_x2;
  run.constants = {cfg.beale_c1, cfg.beale_c2, cfg.beale_c3};
  run.iterations = cfg.iterations;
  run.coupling = cfg.coupling;
  run.lr_sgd = cfg.lr_sgd;
  run.lr_momentum = cfg.lr_momentum;
  run.lr_adam = cfg.lr_adam;
  run.momentum_coefficient = cfg.optimizer.momentum;

  const std::vector<BealeRunResult> results = run_beale_comparison(run);

  RunRecord summary = base_record(cfg);
  // kind: 0=sgd 1=momentum 2=adam
  summary.set_columns({"kind", "cogd", "final_objective", "path_length",
                       "gate_fires", "diverged"});
  for (const auto& result : results) {
    RunRecord rec = base_record(cfg);
    rec.set_columns(
        {"iter", "x1", "x2", "objective", "path_length", "gate_fired"});
    for (const auto& row : result.trace)
      rec.add_row({row[0], row[1], row[2], row[3], row[4], row[5]});
    rec.set_summary("final_objective", result.final_objective);
    rec.set_summary("path_length", result.path_length);
    rec.set_summary("gate_fires", static_cast<double>(result.gate_fires));
    rec.set_summary("diverged", result.diverged ? 1.0 : 0.0);
    rec.write_csv(dir / ("beale_" + to_string(result.kind) +
                         (result.cogd ? "_cogd" : "_plain") + ".csv"));
    summary.add_row({static_cast<double>(static_cast<int>(result.kind)),
                     result.cogd ? 1.0 : 0.0, result.final_objective,
                     result.path_length,
                     static_cast<double>(result.gate_fires),
                     result.diverged ? 1.0 : 0.0});
  }
  summary.write_csv(dir / "beale_summary.csv");
}

void run_lsq_experiment(const ExperimentConfig& cfg,
                        const std::filesystem::path& dir) {
  Rng rng(cfg.seed);
  const int rows = cfg.lsq_rows;
  const int cols = cfg.lsq_cols;
  const double col_scale = 1.0 / std::sqrt(static_cast<double>(cols));

  Rng gen = rng.fork(40);
  Eigen::MatrixXd a_true(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) a_true(r, c) = col_scale * gen.normal();
  Eigen::VectorXd x_true = Eigen::VectorXd::Zero(cols);
  const int nonzeros = std::min(cfg.lsq_true_nonzeros, cols);
  for (int i = 0; i < nonzeros; ++i) {
    Eigen::Index at;
    do {
      at = static_cast<Eigen::Index>(gen.below(cols));
    } while (x_true[at] != 0.0);
    x_true[at] = gen.normal();
  }
  Eigen::VectorXd b = a_true * x_true;
  for (int r = 0; r < rows; ++r) b[r] += cfg.lsq_noise * gen.normal();

  Rng init = rng.fork(41);
  Eigen::MatrixXd a(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) a(r, c) = col_scale * init.normal();
  Eigen::VectorXd x(cols);
  for (int c = 0; c < cols; ++c) x[c] = init.normal();

  OptimizerOptions sparse_opts = cfg.optimizer;
  Optimizer opt_x(sparse_opts);
  OptimizerOptions dense_opts = cfg.optimizer;
  dense_opts.learning_rate = cfg.learning_rate_dense;
  Optimizer opt_a(dense_opts);

  CouplingConfig coupling = cfg.coupling;
  coupling.enabled = cfg.cogd_enabled();
  EpochSnapshot snap{x, a, cfg.optimizer.learning_rate};
  CouplingCoordinator coordinator(coupling, snap);

  RunRecord rec = base_record(cfg);
  rec.set_columns({"iter", "objective", "x_l1", "a_l1", "gate_fired"});
  try {
    for (int iter = 1; iter <= cfg.iterations; ++iter) {
      BilinearLSQ p{a, x, b, cfg.lsq_lambda, cfg.lsq_dense_reg};
      const Eigen::VectorXd gx = lsq_grad_x(p);
      const Eigen::MatrixXd ga = lsq_grad_a(p);
      const Eigen::VectorXd ghat = lsq_ghat(p);

      const Eigen::VectorXd x_next = opt_x.step(x, gx);
      const Eigen::Map<const Eigen::VectorXd> a_flat(a.data(), a.size());
      const Eigen::Map<const Eigen::VectorXd> ga_flat(ga.data(), ga.size());
      const Eigen::VectorXd a_next_flat = opt_a.step(a_flat, ga_flat);
      const Eigen::MatrixXd a_next =
          Eigen::Map<const Eigen::MatrixXd>(a_next_flat.data(), rows, cols);

      const StepResult step = coordinator.step(x_next, a_next, ghat, iter);
      x = step.x;
      a = a_next;

      BilinearLSQ after{a, x, b, cfg.lsq_lambda, cfg.lsq_dense_reg};
      const double objective = lsq_objective(after);
      rec.add_row({static_cast<double>(iter), objective, x.lpNorm<1>(),
                   a.lpNorm<1>(), step.gate.fire ? 1.0 : 0.0});
      if (!std::isfinite(objective))
        throw NumericError("lsq objective diverged at iteration " +
                           std::to_string(iter));
    }
  } catch (const NumericError&) {
    rec.write_csv(dir / "lsq_trace.csv");
    throw;
  }
  rec.set_summary("final_objective", rec.rows().back()[1]);
  rec.set_summary("gate_fires",
                  static_cast<double>(coordinator.fire_count()));
  rec.write_csv(dir / "lsq_trace.csv");
}

struct CscInputs {
  Eigen::ArrayXXd clean;
  Eigen::ArrayXXd mask;
};

CscInputs prepare_csc_inputs(const ExperimentConfig& cfg, Rng& rng) {
  CscInputs in;
  if (!cfg.image_path.empty()) {
    in.clean = load_pgm(cfg.image_path);
    if (cfg.contrast_normalize_input) in.clean = contrast_normalize(in.clean);
  } else {
    CscSynthSpec spec;
    spec.image_size = cfg.csc_image_size;
    spec.filter_count = cfg.csc_filters;
    spec.filter_dim = cfg.csc_filter_size;
    spec.code_density = cfg.csc_code_density;
    Rng synth_rng = rng.fork(20);
    in.clean = synth_csc_image(spec, synth_rng).image;
  }
  if (cfg.keep_fraction < 1.0) {
    Rng mask_rng = rng.fork(21);
    in.mask = make_mask(in.clean.rows(), in.clean.cols(), cfg.keep_fraction,
                        mask_rng);
  } else {
    in.mask = Eigen::ArrayXXd::Ones(in.clean.rows(), in.clean.cols());
  }
  return in;
}

CSCProblem problem_from(const ExperimentConfig& cfg, const CscInputs& in) {
  CSCProblem p;
  p.image = in.clean;
  p.mask = in.mask;
  p.lambda_sparse = cfg.csc_lambda;
  p.admm_penalty = cfg.csc_rho;
  p.max_outer_iters = cfg.csc_outer_iters;
  p.inner_passes = cfg.csc_inner_passes;
  p.cg_max_iters = cfg.csc_cg_iters;
  p.cg_tol = cfg.csc_cg_tol;
  return p;
}

void run_csc_experiment(const ExperimentConfig& cfg,
                        const std::filesystem::path& dir) {
  const bool inpainting = cfg.experiment == "csc-inpaint";
  Rng rng(cfg.seed);
  const CscInputs inputs = prepare_csc_inputs(cfg, rng);
  const CSCProblem p = problem_from(cfg, inputs);

  CouplingConfig coupling = cfg.coupling;
  coupling.enabled = cfg.cogd_enabled();
  Rng filter_rng = rng.fork(22);
  const FilterBank initial = FilterBank::random_feasible(
      cfg.csc_filters, cfg.csc_filter_size, filter_rng);

  CscSolver solver(p, initial, coupling);
  RunRecord trace = base_record(cfg);
  try {
    solver.solve(trace);
  } catch (const NumericError&) {
    trace.write_csv(dir / "csc_trace.csv");
    throw;
  }
  trace.write_csv(dir / "csc_trace.csv");

  const Eigen::ArrayXXd result =
      inpainting ? inpaint(p, solver.filters(), cfg.csc_inpaint_passes)
                 : solver.reconstruction();

  const double max_value = value_range(inputs.clean);
  const double psnr_db = psnr_or_inf(inputs.clean, result, max_value);
  const int window = static_cast<int>(
      std::min<Eigen::Index>(8, std::min(inputs.clean.rows(),
                                         inputs.clean.cols())));
  const double ssim_value = ssim(inputs.clean, result, max_value, window);

  RunRecord metrics = base_record(cfg);
  metrics.set_columns({"image_id", "psnr_db", "ssim", "cogd"});
  metrics.add_row({0.0, psnr_db, ssim_value, cfg.cogd_enabled() ? 1.0 : 0.0});
  metrics.set_summary("psnr_db", psnr_db);
  metrics.set_summary("ssim", ssim_value);
  metrics.write_csv(dir / "metrics.csv");

  const double lo = inputs.clean.minCoeff();
  const double range = value_range(inputs.clean);
  save_pgm(to_unit_range(inputs.clean, lo, range), dir / "clean.pgm");
  if (inpainting) {
    save_pgm(to_unit_range(inputs.clean * inputs.mask, lo, range),
             dir / "observed.pgm");
    save_pgm(inputs.mask, dir / "mask.pgm", 1);
    save_pgm(to_unit_range(result, lo, range), dir / "inpainted.pgm");
  } else {
    save_pgm(to_unit_range(result, lo, range), dir / "reconstruction.pgm");
  }
}

void run_toy_experiment(const ExperimentConfig& cfg,
                        const std::filesystem::path& dir) {
  const bool pruning = cfg.experiment == "prune-toy";
  Rng rng(cfg.seed);

  TeacherSpec teacher;
  teacher.samples = cfg.toy_samples;
  teacher.input_dim = cfg.toy_input_dim;
  teacher.hidden.assign(static_cast<std::size_t>(cfg.toy_hidden_layers),
                        cfg.toy_hidden);
  teacher.output_dim = cfg.toy_output_dim;
  teacher.noise = cfg.toy_noise;
  Rng data_rng = rng.fork(30);
  const TeacherData data = synth_teacher_dataset(teacher, data_rng);

  TinyNetSpec net_spec;
  net_spec.input_dim = cfg.toy_input_dim;
  net_spec.hidden = teacher.hidden;
  net_spec.output_dim = cfg.toy_output_dim;
  net_spec.hidden_norm = !pruning;
  if (cfg.mask_init == "ones") net_spec.mask_init = MaskInit::Ones;
  if (cfg.mask_init == "normal") net_spec.mask_init = MaskInit::Normal;
  if (cfg.mask_init == "absnormal") net_spec.mask_init = MaskInit::AbsNormal;
  Rng net_rng = rng.fork(31);
  TinyNet net = make_tinynet(net_spec, net_rng);

  ToyTrainOptions opts;
  opts.epochs = cfg.toy_epochs;
  opts.optimizer = cfg.optimizer;
  opts.coupling = cfg.coupling;
  opts.coupling.enabled = cfg.cogd_enabled();
  opts.lambda_mask = cfg.lambda_mask;
  opts.weight_reg = cfg.weight_reg;
  opts.lambda_weight_l1 = cfg.lambda_weight_l1;
  opts.quantile_a = cfg.quantile_a;
  opts.train_masks = pruning;
  opts.update_masks = pruning;
  opts.update_weight_rows = !pruning;
  opts.cosine_schedule = cfg.cosine_schedule;
  opts.variant = cfg.cogd_enabled() ? ToyVariant::Cogd : ToyVariant::Sgd;

  RunRecord trace = base_record(cfg);
  try {
    train_toy(net, data.dataset, opts, trace);
  } catch (const NumericError&) {
    trace.write_csv(dir / "toy_trace.csv");
    throw;
  }
  trace.set_summary("async_mask_final",
                    static_cast<double>(asynchrony_count_masks(
                        net, opts.coupling.alpha_sparse, opts.quantile_a)));
  trace.set_summary("async_gamma_final",
                    static_cast<double>(
                        asynchrony_count_gamma(net, opts.quantile_a)));
  trace.write_csv(dir / "toy_trace.csv");
  save_model(net, dir / "model.txt");
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg,
                    const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + output_dir.string() +
                  ": " + ec.message());
  DirLock lock(output_dir);

  if (cfg.experiment == "beale") {
    run_beale_experiment(cfg, output_dir);
  } else if (cfg.experiment == "bilinear-lsq") {
    run_lsq_experiment(cfg, output_dir);
  } else if (cfg.experiment == "csc-reconstruct" ||
             cfg.experiment == "csc-inpaint") {
    run_csc_experiment(cfg, output_dir);
  } else if (cfg.experiment == "prune-toy" || cfg.experiment == "train-toy") {
    run_toy_experiment(cfg, output_dir);
  } else {
    throw InvalidInput("unknown experiment '" + cfg.experiment + "'");
  }
}

std::string report_run_dir(const std::filesystem::path& run_dir) {
  if (!std::filesystem::is_directory(run_dir))
    throw IoError("not a directory: " + run_dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) return "no record files in " + run_dir.string() + "\n";

  std::ostringstream out;
  for (const auto& file : files) {
    RunRecord rec;
    try {
      rec = RunRecord::read_csv(file);
    } catch (const IoError&) {
      continue;  // not a record file
    }
    out << file.filename().string() << "\n";
    try {
      out << "  experiment: " << rec.header_value("experiment")
          << "  seed: " << rec.header_value("seed")
          << "  variant: " << rec.header_value("variant") << "\n";
    } catch (const InvalidInput&) {
    }
    out << "  rows: " << rec.rows().size() << "\n";
    for (const auto& [key, value] : rec.summary())
      out << "  " << key << ": " << format_double(value) << "\n";
  }
  return out.str();
}

}  // namespace cogd

#include "cogd/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cogd/bilinear_lsq.hpp"
#include "cogd/errors.hpp"

namespace cogd {

void TinyNet::validate() const {
  if (layers.empty()) throw InvalidInput("TinyNet: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LinearLayer& layer = layers[l];
    if (layer.mask.size() != layer.out_features())
      throw InvalidInput("TinyNet: mask length must equal output units");
    if (layer.has_norm) {
      if (layer.norm.gamma.size() != layer.out_features() ||
          layer.norm.shift.size() != layer.out_features())
        throw InvalidInput("TinyNet: norm parameter length mismatch");
      if (layer.norm.epsilon <= 0)
        throw InvalidInput("TinyNet: norm epsilon must be > 0");
    }
    if (l + 1 < layers.size() &&
        layers[l + 1].in_features() != layer.out_features())
      throw InvalidInput("TinyNet: layer dimensions do not chain");
  }
}

TinyNet make_tinynet(const TinyNetSpec& spec, Rng& rng) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw InvalidInput("TinyNetSpec: dimensions must be positive");
  std::vector<int> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.output_dim);

  TinyNet net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    const bool is_last = (l + 2 == dims.size());
    LinearLayer layer;
    layer.weight.resize(out, in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = scale * rng.normal();
    layer.mask.resize(out);
    for (int j = 0; j < out; ++j) {
      switch (is_last ? MaskInit::Ones : spec.mask_init) {
        case MaskInit::Ones: layer.mask[j] = 1.0; break;
        case MaskInit::Normal: layer.mask[j] = rng.normal(); break;
        case MaskInit::AbsNormal: layer.mask[j] = std::abs(rng.normal()); break;
      }
    }
    layer.has_norm = !is_last && spec.hidden_norm;
    if (layer.has_norm) {
      layer.norm.gamma = Eigen::VectorXd::Ones(out);
      layer.norm.shift = Eigen::VectorXd::Zero(out);
    }
    layer.has_activation = !is_last;
    layer.prunable = !is_last;
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

Eigen::MatrixXd norm_forward(const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& gamma,
                             const Eigen::VectorXd& shift, double epsilon) {
  if (x.rows() < 2)
    throw InvalidInput("norm_forward: needs a batch of at least 2");
  if (gamma.size() != x.cols() || shift.size() != x.cols())
    throw InvalidInput("norm_forward: parameter length mismatch");
  if (epsilon <= 0) throw InvalidInput("norm_forward: epsilon must be > 0");
  const double m = static_cast<double>(x.rows());
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mu = x.col(j).mean();
    const double var = (x.col(j).array() - mu).square().sum() / m;
    out.col(j) = ((x.col(j).array() - mu) / std::sqrt(var + epsilon)) *
                     gamma[j] +
                 shift[j];
  }
  return out;
}

Eigen::MatrixXd forward_masked(const TinyNet& net, const Eigen::MatrixXd& batch,
                               GradientTape* tape) {
  net.validate();
  if (batch.cols() != net.input_dim())
    throw InvalidInput("forward_masked: batch width must match input size");
  for (const auto& layer : net.layers) {
    if (layer.has_norm && batch.rows() < 2)
      throw InvalidInput(
          "forward_masked: normalization needs a batch of at least 2");
  }

  if (tape) *tape = GradientTape{};
  Eigen::MatrixXd h = batch;
  for (const auto& layer : net.layers) {
    const Eigen::MatrixXd linear = h * layer.weight.transpose();
    const Eigen::MatrixXd masked =
        (linear.array().rowwise() * layer.mask.transpose().array()).matrix();
    Eigen::MatrixXd normed;
    Eigen::VectorXd mu, var;
    Eigen::MatrixXd xhat;
    if (layer.has_norm) {
      const double m = static_cast<double>(masked.rows());
      mu.resize(masked.cols());
      var.resize(masked.cols());
      xhat.resize(masked.rows(), masked.cols());
      normed.resize(masked.rows(), masked.cols());
      for (Eigen::Index j = 0; j < masked.cols(); ++j) {
        mu[j] = masked.col(j).mean();
        var[j] = (masked.col(j).array() - mu[j]).square().sum() / m;
        xhat.col(j) = (masked.col(j).array() - mu[j]) /
                      std::sqrt(var[j] + layer.norm.epsilon);
        normed.col(j) =
            xhat.col(j) * layer.norm.gamma[j] +
            Eigen::VectorXd::Constant(masked.rows(), layer.norm.shift[j]);
      }
    } else {
      normed = masked;
    }
    const Eigen::MatrixXd out =
        layer.has_activation ? normed.cwiseMax(0.0).eval() : normed;
    if (tape) {
      tape->inputs.push_back(h);
      tape->linear.push_back(linear);
      tape->masked.push_back(masked);
      tape->normed.push_back(normed);
      tape->xhat.push_back(xhat);
      tape->mu.push_back(mu);
      tape->var.push_back(var);
    }
    h = out;
  }
  if (tape) tape->output = h;
  return h;
}

TapeGrads backward(const TinyNet& net, const GradientTape& tape,
                   const Eigen::MatrixXd& dloss_doutput) {
  const std::size_t layer_count = net.layers.size();
  if (tape.inputs.size() != layer_count)
    throw InvalidInput("backward: tape does not match the network");
  if (dloss_doutput.rows() != tape.output.rows() ||
      dloss_doutput.cols() != tape.output.cols())
    throw InvalidInput("backward: loss gradient shape mismatch");

  TapeGrads grads;
  grads.weight.resize(layer_count);
  grads.mask.resize(layer_count);
  grads.gamma.resize(layer_count);
  grads.shift.resize(layer_count);

  Eigen::MatrixXd g = dloss_doutput;
  for (std::size_t li = layer_count; li-- > 0;) {
    const LinearLayer& layer = net.layers[li];
    if (layer.has_activation) {
      g = (g.array() * (tape.normed[li].array() > 0.0).cast<double>()).matrix();
    }
    Eigen::MatrixXd d_masked;
    if (layer.has_norm) {
      grads.gamma[li] =
          (g.array() * tape.xhat[li].array()).colwise().sum().transpose();
      grads.shift[li] = g.colwise().sum().transpose();
      d_masked.resize(g.rows(), g.cols());
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        const Eigen::ArrayXd dxhat = g.col(j).array() * layer.norm.gamma[j];
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat =
            (dxhat * tape.xhat[li].col(j).array()).mean();
        d_masked.col(j) =
            ((dxhat - mean_dxhat -
              tape.xhat[li].col(j).array() * mean_dxhat_xhat) /
             std::sqrt(tape.var[li][j] + layer.norm.epsilon))
                .matrix();
      }
    } else {
      grads.gamma[li] = Eigen::VectorXd();
      grads.shift[li] = Eigen::VectorXd();
      d_masked = g;
    }
    grads.mask[li] = (d_masked.array() * tape.linear[li].array())
                         .colwise()
                         .sum()
                         .transpose();
    const Eigen::MatrixXd d_linear =
        (d_masked.array().rowwise() * layer.mask.transpose().array()).matrix();
    grads.weight[li] = d_linear.transpose() * tape.inputs[li];
    if (li > 0) g = d_linear * layer.weight;
  }
  return grads;
}

ToyLossTerms toy_loss_terms(const TinyNet& net, const Eigen::MatrixXd& pred,
                            const Eigen::MatrixXd& targets, double lambda_mask,
                            double weight_reg, double lambda_weight_l1) {
  if (pred.rows() != targets.rows() || pred.cols() != targets.cols())
    throw InvalidInput("toy_loss_terms: prediction and target shapes differ");
  ToyLossTerms terms;
  terms.data = (pred - targets).array().square().mean();
  for (const auto& layer : net.layers) {
    if (layer.prunable)
      terms.mask_l1 += lambda_mask * layer.mask.lpNorm<1>();
    terms.weight_l1 += lambda_weight_l1 * layer.weight.lpNorm<1>();
    terms.weight_l2 += weight_reg * layer.weight.squaredNorm();
  }
  return terms;
}

double pruning_loss(const TinyNet& net, const Eigen::MatrixXd& batch,
                    const Eigen::MatrixXd& targets, double lambda_mask,
                    double weight_reg) {
  const Eigen::MatrixXd pred = forward_masked(net, batch);
  return toy_loss_terms(net, pred, targets, lambda_mask, weight_reg).total();
}

GhatResult ghat_pruning(const Eigen::VectorXd& weight_row_grad, double m_j,
                        double zero_guard) {
  GhatResult result;
  if (std::abs(m_j) < zero_guard) {
    result.guard_needed = true;
    return result;
  }
  result.ghat = weight_row_grad / m_j;
  return result;
}

std::vector<bool> top_fraction_selection(const Eigen::VectorXd& stats,
                                         double fraction) {
  if (fraction < 0 || fraction > 1)
    throw InvalidInput("top_fraction_selection: fraction must be in [0, 1]");
  const Eigen::Index n = stats.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return stats[a] > stats[b];
                   });
  const auto take = static_cast<Eigen::Index>(
      std::ceil(fraction * static_cast<double>(n) - 1e-12));
  std::vector<bool> selected(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < std::min(take, n); ++i)
    selected[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        true;
  return selected;
}

ToySnapshot snapshot_of(const TinyNet& net) {
  ToySnapshot snap;
  for (const auto& layer : net.layers) {
    snap.weights.push_back(layer.weight);
    snap.masks.push_back(layer.mask);
    snap.gammas.push_back(layer.has_norm ? layer.norm.gamma
                                         : Eigen::VectorXd());
  }
  return snap;
}

namespace {

Eigen::VectorXd row_norms(const Eigen::MatrixXd& w) {
  return w.rowwise().norm();
}

double unit_coupling_beta(const Eigen::VectorXd& row_curr,
                          const Eigen::VectorXd& row_prev, double x_curr,
                          double x_prev, const Eigen::VectorXd& ghat,
                          const CouplingConfig& cfg, double eta2) {
  const Eigen::MatrixXd response = finite_difference_coupling(
      row_curr, row_prev, Eigen::VectorXd::Constant(1, x_curr),
      Eigen::VectorXd::Constant(1, x_prev), cfg.zero_guard);
  const Eigen::VectorXd c =
      coupling_coefficient(ghat, response, cfg.kernel_exponent);
  return cfg.beta_scale * eta2 * c[0];
}

}  // namespace

std::vector<int> cogd_mask_update(TinyNet& net, const TapeGrads& epoch_grads,
                                  const CouplingConfig& cfg,
                                  const ToySnapshot& snap, double quantile_a,
                                  double eta2) {
  std::vector<int> fires(net.layers.size(), 0);
  if (!cfg.enabled) return fires;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    LinearLayer& layer = net.layers[l];
    if (!layer.prunable) continue;
    const std::vector<bool> dense_large =
        top_fraction_selection(row_norms(layer.weight), 1.0 - quantile_a);
    for (int j = 0; j < layer.out_features(); ++j) {
      const bool sparse_small = !(std::abs(layer.mask[j]) >= cfg.alpha_sparse);
      if (!(sparse_small && dense_large[static_cast<std::size_t>(j)]))
        continue;
      ++fires[l];
      if (cfg.beta_scale == 0.0) continue;
      const GhatResult gr = ghat_pruning(
          epoch_grads.weight[l].row(j).transpose(), layer.mask[j],
          cfg.zero_guard);
      const Eigen::VectorXd ghat =
          gr.guard_needed ? epoch_grads.weight[l].row(j).transpose().eval()
                          : gr.ghat;
      const double beta = unit_coupling_beta(
          layer.weight.row(j).transpose(), snap.weights[l].row(j).transpose(),
          layer.mask[j], snap.masks[l][j], ghat, cfg, eta2);
      layer.mask[j] += beta * snap.masks[l][j];
    }
  }
  return fires;
}

std::vector<int> cogd_weight_backtrack(TinyNet& net,
                                       const TapeGrads& epoch_grads,
                                       const CouplingConfig& cfg,
                                       const ToySnapshot& snap,
                                       double quantile_a, double eta2) {
  std::vector<int> fires(net.layers.size(), 0);
  if (!cfg.enabled) return fires;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    LinearLayer& layer = net.layers[l];
    if (!layer.has_norm) continue;
    const std::vector<bool> gamma_large = top_fraction_selection(
        layer.norm.gamma.cwiseAbs(), 1.0 - quantile_a);
    const std::vector<bool> dense_large =
        top_fraction_selection(row_norms(layer.weight), 1.0 - quantile_a);
    for (int j = 0; j < layer.out_features(); ++j) {
      const bool fire = !gamma_large[static_cast<std::size_t>(j)] &&
                        dense_large[static_cast<std::size_t>(j)];
      if (!fire) continue;
      ++fires[l];
      if (cfg.beta_scale == 0.0) continue;
      const double gamma_j = layer.norm.gamma[j];
      const GhatResult gr = ghat_pruning(
          epoch_grads.weight[l].row(j).transpose(), gamma_j, cfg.zero_guard);
      const Eigen::VectorXd ghat =
          gr.guard_needed ? epoch_grads.weight[l].row(j).transpose().eval()
                          : gr.ghat;
      const double beta = unit_coupling_beta(
          layer.weight.row(j).transpose(), snap.weights[l].row(j).transpose(),
          gamma_j, snap.gammas[l][j], ghat, cfg, eta2);
      layer.weight.row(j) += beta * snap.weights[l].row(j);
    }
  }
  return fires;
}

long asynchrony_count_masks(const TinyNet& net, double alpha_mask,
                            double quantile_a) {
  long count = 0;
  for (const auto& layer : net.layers) {
    if (!layer.prunable) continue;
    const std::vector<bool> dense_large =
        top_fraction_selection(row_norms(layer.weight), 1.0 - quantile_a);
    for (int j = 0; j < layer.out_features(); ++j) {
      if (std::abs(layer.mask[j]) < alpha_mask &&
          dense_large[static_cast<std::size_t>(j)])
        ++count;
    }
  }
  return count;
}

long asynchrony_count_gamma(const TinyNet& net, double quantile_a) {
  long count = 0;
  for (const auto& layer : net.layers) {
    if (!layer.has_norm) continue;
    const std::vector<bool> gamma_large = top_fraction_selection(
        layer.norm.gamma.cwiseAbs(), 1.0 - quantile_a);
    const std::vector<bool> dense_large =
        top_fraction_selection(row_norms(layer.weight), 1.0 - quantile_a);
    for (int j = 0; j < layer.out_features(); ++j) {
      if (!gamma_large[static_cast<std::size_t>(j)] &&
          dense_large[static_cast<std::size_t>(j)])
        ++count;
    }
  }
  return count;
}

void apply_prune_threshold(TinyNet& net, double tau) {
  for (auto& layer : net.layers) {
    if (!layer.prunable) continue;
    for (int j = 0; j < layer.out_features(); ++j) {
      if (std::abs(layer.mask[j]) < tau) layer.mask[j] = 0.0;
    }
  }
}

TinyNet remove_pruned_units(const TinyNet& net) {
  net.validate();
  TinyNet pruned = net;
  for (std::size_t l = 0; l + 1 < pruned.layers.size(); ++l) {
    LinearLayer& layer = pruned.layers[l];
    if (!layer.prunable) continue;
    std::vector<int> keep;
    for (int j = 0; j < layer.out_features(); ++j)
      if (layer.mask[j] != 0.0) keep.push_back(j);
    if (static_cast<int>(keep.size()) == layer.out_features()) continue;

    LinearLayer smaller = layer;
    smaller.weight.resize(static_cast<Eigen::Index>(keep.size()),
                          layer.in_features());
    smaller.mask.resize(static_cast<Eigen::Index>(keep.size()));
    if (layer.has_norm) {
      smaller.norm.gamma.resize(static_cast<Eigen::Index>(keep.size()));
      smaller.norm.shift.resize(static_cast<Eigen::Index>(keep.size()));
    }
    for (std::size_t i = 0; i < keep.size(); ++i) {
      smaller.weight.row(static_cast<Eigen::Index>(i)) =
          layer.weight.row(keep[i]);
      smaller.mask[static_cast<Eigen::Index>(i)] = layer.mask[keep[i]];
      if (layer.has_norm) {
        smaller.norm.gamma[static_cast<Eigen::Index>(i)] =
            layer.norm.gamma[keep[i]];
        smaller.norm.shift[static_cast<Eigen::Index>(i)] =
            layer.norm.shift[keep[i]];
      }
    }
    LinearLayer& next = pruned.layers[l + 1];
    Eigen::MatrixXd next_weight(next.out_features(),
                                static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i)
      next_weight.col(static_cast<Eigen::Index>(i)) =
          next.weight.col(keep[i]);
    next.weight = std::move(next_weight);
    pruned.layers[l] = std::move(smaller);
  }
  pruned.validate();
  return pruned;
}

void save_model(const TinyNet& net, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "cogd-tinynet 1\n";
  out << "layers " << net.layers.size() << "\n";
  for (const auto& layer : net.layers) {
    out << "layer " << layer.out_features() << ' ' << layer.in_features()
        << ' ' << (layer.has_norm ? 1 : 0) << ' '
        << (layer.has_activation ? 1 : 0) << ' ' << (layer.prunable ? 1 : 0)
        << ' ' << format_double(layer.norm.epsilon) << "\n";
    out << "weight " << layer.out_features() << ' ' << layer.in_features()
        << "\n";
    for (int r = 0; r < layer.out_features(); ++r) {
      for (int c = 0; c < layer.in_features(); ++c) {
        if (c) out << ' ';
        out << format_double(layer.weight(r, c));
      }
      out << "\n";
    }
    out << "mask " << layer.mask.size() << "\n";
    for (Eigen::Index j = 0; j < layer.mask.size(); ++j) {
      if (j) out << ' ';
      out << format_double(layer.mask[j]);
    }
    out << "\n";
    if (layer.has_norm) {
      out << "gamma " << layer.norm.gamma.size() << "\n";
      for (Eigen::Index j = 0; j < layer.norm.gamma.size(); ++j) {
        if (j) out << ' ';
        out << format_double(layer.norm.gamma[j]);
      }
      out << "\nshift " << layer.norm.shift.size() << "\n";
      for (Eigen::Index j = 0; j < layer.norm.shift.size(); ++j) {
        if (j) out << ' ';
        out << format_double(layer.norm.shift[j]);
      }
      out << "\n";
    }
  }
  write_file_atomic(path, out.str());
}

TinyNet load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "cogd-tinynet" || version != 1)
    throw IoError("not a tinynet model file: " + path.string());
  std::string word;
  std::size_t layer_count = 0;
  in >> word >> layer_count;
  if (word != "layers") throw IoError("bad model header");

  auto read_values = [&](const std::string& expect, Eigen::Index n,
                         auto setter) {
    std::string name;
    Eigen::Index count = 0;
    in >> name >> count;
    if (name != expect || count != n)
      throw IoError("bad tensor header in " + path.string());
    for (Eigen::Index i = 0; i < n; ++i) {
      double v;
      if (!(in >> v)) throw IoError("truncated tensor in " + path.string());
      setter(i, v);
    }
  };

  TinyNet net;
  for (std::size_t l = 0; l < layer_count; ++l) {
    int out_f = 0, in_f = 0, has_norm = 0, has_act = 0, prunable = 0;
    double epsilon = 0;
    in >> word >> out_f >> in_f >> has_norm >> has_act >> prunable >> epsilon;
    if (word != "layer" || !in) throw IoError("bad layer header");
    LinearLayer layer;
    layer.weight.resize(out_f, in_f);
    layer.mask.resize(out_f);
    layer.has_norm = has_norm != 0;
    layer.has_activation = has_act != 0;
    layer.prunable = prunable != 0;
    layer.norm.epsilon = epsilon;
    {
      std::string name;
      int r = 0, c = 0;
      in >> name >> r >> c;
      if (name != "weight" || r != out_f || c != in_f)
        throw IoError("bad weight header");
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          double v;
          if (!(in >> v)) throw IoError("truncated weight tensor");
          layer.weight(i, j) = v;
        }
    }
    read_values("mask", out_f, [&](Eigen::Index i, double v) {
      layer.mask[i] = v;
    });
    if (layer.has_norm) {
      layer.norm.gamma.resize(out_f);
      layer.norm.shift.resize(out_f);
      read_values("gamma", out_f, [&](Eigen::Index i, double v) {
        layer.norm.gamma[i] = v;
      });
      read_values("shift", out_f, [&](Eigen::Index i, double v) {
        layer.norm.shift[i] = v;
      });
    }
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

void train_toy(TinyNet& net, const TeacherDataset& data,
               const ToyTrainOptions& opts, RunRecord& record) {
  net.validate();
  opts.optimizer.validate();
  opts.coupling.validate();
  if (data.inputs.rows() != data.targets.rows())
    throw InvalidInput("train_toy: inputs and targets row counts differ");
  if (data.inputs.rows() < 2)
    throw InvalidInput("train_toy: need at least 2 samples");
  if (opts.epochs < 1) throw InvalidInput("train_toy: epochs must be >= 1");

  const std::size_t layer_count = net.layers.size();
  std::vector<Optimizer> opt_w, opt_m, opt_g, opt_s;
  for (std::size_t l = 0; l < layer_count; ++l) {
    opt_w.emplace_back(opts.optimizer);
    opt_m.emplace_back(opts.optimizer);
    opt_g.emplace_back(opts.optimizer);
    opt_s.emplace_back(opts.optimizer);
  }

  std::vector<std::string> columns{"epoch",      "loss",        "data_term",
                                   "learning_rate", "mask_fires", "weight_fires",
                                   "async_mask", "async_gamma"};
  for (std::size_t l = 0; l < layer_count; ++l) {
    const std::string tag = std::to_string(l);
    columns.push_back("mask_l1_" + tag);
    columns.push_back("gamma_l1_" + tag);
    columns.push_back("row_norm_mean_" + tag);
  }
  record.set_columns(columns);

  const bool cogd = opts.variant == ToyVariant::Cogd;
  ToySnapshot snap = snapshot_of(net);
  const double n_out = static_cast<double>(data.targets.rows()) *
                       static_cast<double>(data.targets.cols());

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    const double lr =
        opts.cosine_schedule
            ? cosine_lr(opts.optimizer.learning_rate, epoch - 1, opts.epochs)
            : opts.optimizer.learning_rate;
    GradientTape tape;
    const Eigen::MatrixXd pred = forward_masked(net, data.inputs, &tape);
    const ToyLossTerms terms =
        toy_loss_terms(net, pred, data.targets, opts.lambda_mask,
                       opts.weight_reg, opts.lambda_weight_l1);
    const Eigen::MatrixXd dloss = (2.0 / n_out) * (pred - data.targets);
    TapeGrads grads = backward(net, tape, dloss);

    for (std::size_t l = 0; l < layer_count; ++l) {
      LinearLayer& layer = net.layers[l];
      Eigen::MatrixXd wgrad = grads.weight[l];
      wgrad += 2.0 * opts.weight_reg * layer.weight;
      if (opts.lambda_weight_l1 != 0.0) {
        wgrad += opts.lambda_weight_l1 *
                 layer.weight.unaryExpr([](double v) { return sign0(v); });
      }
      grads.weight[l] = wgrad;
      if (layer.prunable) {
        for (Eigen::Index j = 0; j < layer.mask.size(); ++j)
          grads.mask[l][j] += opts.lambda_mask * sign0(layer.mask[j]);
      }
    }

    // Optimizer steps on every trained tensor.
    for (std::size_t l = 0; l < layer_count; ++l) {
      LinearLayer& layer = net.layers[l];
      opt_w[l].set_learning_rate(lr);
      const Eigen::Map<const Eigen::VectorXd> wflat(layer.weight.data(),
                                                    layer.weight.size());
      const Eigen::Map<const Eigen::VectorXd> gflat(grads.weight[l].data(),
                                                    grads.weight[l].size());
      const Eigen::VectorXd wnew = opt_w[l].step(wflat, gflat);
      layer.weight = Eigen::Map<const Eigen::MatrixXd>(
          wnew.data(), layer.weight.rows(), layer.weight.cols());
      if (layer.prunable && opts.train_masks) {
        opt_m[l].set_learning_rate(lr);
        layer.mask = opt_m[l].step(layer.mask, grads.mask[l]);
      }
      if (layer.has_norm) {
        opt_g[l].set_learning_rate(lr);
        opt_s[l].set_learning_rate(lr);
        layer.norm.gamma = opt_g[l].step(layer.norm.gamma, grads.gamma[l]);
        layer.norm.shift = opt_s[l].step(layer.norm.shift, grads.shift[l]);
      }
    }

    int mask_fires = 0;
    int weight_fires = 0;
    if (cogd && epoch % opts.coupling.period == 0) {
      if (opts.update_masks) {
        for (int f : cogd_mask_update(net, grads, opts.coupling, snap,
                                      opts.quantile_a, lr))
          mask_fires += f;
      }
      if (opts.update_weight_rows) {
        for (int f : cogd_weight_backtrack(net, grads, opts.coupling, snap,
                                           opts.quantile_a, lr))
          weight_fires += f;
      }
      snap = snapshot_of(net);
    }

    std::vector<double> row{static_cast<double>(epoch),
                            terms.total(),
                            terms.data,
                            lr,
                            static_cast<double>(mask_fires),
                            static_cast<double>(weight_fires),
                            static_cast<double>(asynchrony_count_masks(
                                net, opts.coupling.alpha_sparse,
                                opts.quantile_a)),
                            static_cast<double>(
                                asynchrony_count_gamma(net, opts.quantile_a))};
    for (std::size_t l = 0; l < layer_count; ++l) {
      const LinearLayer& layer = net.layers[l];
      row.push_back(layer.mask.lpNorm<1>());
      row.push_back(layer.has_norm ? layer.norm.gamma.lpNorm<1>() : 0.0);
      row.push_back(row_norms(layer.weight).mean());
    }
    record.add_row(row);
    if (!std::isfinite(terms.total()))
      throw NumericError("train_toy: loss diverged at epoch " +
                         std::to_string(epoch));
  }

  record.set_summary("final_loss",
                     record.rows().empty() ? 0.0 : record.rows().back()[1]);
}

}  // namespace cogd

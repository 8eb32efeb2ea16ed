#include "cogd/synth.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "cogd/errors.hpp"

namespace cogd {

Eigen::ArrayXXd make_mask(Eigen::Index rows, Eigen::Index cols,
                          double keep_fraction, Rng& rng) {
  if (rows < 1 || cols < 1) throw InvalidInput("make_mask: empty shape");
  if (keep_fraction <= 0.0 || keep_fraction > 1.0)
    throw InvalidInput("make_mask: keep_fraction must be in (0, 1]");
  const std::size_t total = static_cast<std::size_t>(rows) * cols;
  const auto keep = static_cast<std::size_t>(
      std::lround(keep_fraction * static_cast<double>(total)));

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the project generator; std::shuffle is not
  // reproducible across standard libraries.
  for (std::size_t i = total; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }

  Eigen::ArrayXXd mask = Eigen::ArrayXXd::Zero(rows, cols);
  for (std::size_t i = 0; i < keep && i < total; ++i) {
    const auto flat = static_cast<Eigen::Index>(order[i]);
    mask(flat / cols, flat % cols) = 1.0;
  }
  return mask;
}

TeacherData synth_teacher_dataset(const TeacherSpec& spec, Rng& rng) {
  if (spec.samples < 1) throw InvalidInput("TeacherSpec: samples must be >= 1");
  if (spec.noise < 0) throw InvalidInput("TeacherSpec: noise must be >= 0");

  TinyNetSpec net_spec;
  net_spec.input_dim = spec.input_dim;
  net_spec.hidden = spec.hidden;
  net_spec.output_dim = spec.output_dim;
  net_spec.hidden_norm = false;
  net_spec.mask_init = MaskInit::Ones;
  Rng net_rng = rng.fork(1);
  TinyNet teacher = make_tinynet(net_spec, net_rng);

  Eigen::MatrixXd inputs(spec.samples, spec.input_dim);
  Rng data_rng = rng.fork(2);
  for (int i = 0; i < spec.samples; ++i)
    for (int j = 0; j < spec.input_dim; ++j)
      inputs(i, j) = data_rng.normal();

  Eigen::MatrixXd targets = forward_masked(teacher, inputs);
  if (spec.noise > 0) {
    Rng noise_rng = rng.fork(3);
    for (Eigen::Index i = 0; i < targets.rows(); ++i)
      for (Eigen::Index j = 0; j < targets.cols(); ++j)
        targets(i, j) += spec.noise * noise_rng.normal();
  }
  return TeacherData{TeacherDataset{std::move(inputs), std::move(targets)},
                     std::move(teacher)};
}

CscSynth synth_csc_image(const CscSynthSpec& spec, Rng& rng) {
  if (spec.image_size < spec.filter_dim)
    throw InvalidInput("CscSynthSpec: image smaller than filters");
  if (spec.code_density <= 0 || spec.code_density > 1)
    throw InvalidInput("CscSynthSpec: code_density must be in (0, 1]");

  CscSynth synth;
  Rng filter_rng = rng.fork(11);
  synth.filters.filters.reserve(static_cast<std::size_t>(spec.filter_count));
  for (int k = 0; k < spec.filter_count; ++k) {
    Eigen::ArrayXXd f(spec.filter_dim, spec.filter_dim);
    for (int r = 0; r < spec.filter_dim; ++r)
      for (int c = 0; c < spec.filter_dim; ++c) f(r, c) = filter_rng.normal();
    const double norm = std::sqrt(f.square().sum());
    if (norm > 0) f /= norm;  // exactly unit norm, inside the constraint set
    synth.filters.filters.push_back(std::move(f));
  }

  const Eigen::Index size = spec.image_size;
  synth.codes = CodeMaps::zeros(spec.filter_count, size, size);
  const auto pixels = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  const auto nonzeros = static_cast<std::size_t>(
      std::lround(spec.code_density * static_cast<double>(pixels)));
  Rng code_rng = rng.fork(12);
  for (int k = 0; k < spec.filter_count; ++k) {
    for (std::size_t i = 0; i < nonzeros; ++i) {
      const auto flat = static_cast<Eigen::Index>(code_rng.below(pixels));
      synth.codes.codes[k](flat / size, flat % size) =
          spec.amplitude * code_rng.normal();
    }
  }
  synth.image = reconstruct(synth.filters, synth.codes);
  return synth;
}

Eigen::ArrayXXd contrast_normalize(const Eigen::ArrayXXd& image) {
  if (image.size() == 0) throw InvalidInput("contrast_normalize: empty image");
  const double mean = image.mean();
  const double var = (image - mean).square().mean();
  const double stddev = std::sqrt(var);
  if (stddev < 1e-12) return image - mean;
  return (image - mean) / stddev;
}

}  // namespace cogd

#pragma once

#include <Eigen/Dense>

#include "cogd/csc.hpp"
#include "cogd/rng.hpp"
#include "cogd/tinynet.hpp"

namespace cogd {

/// Binary mask with exactly round(keep_fraction * pixels) ones placed
/// uniformly at random. Deterministic per seed.
Eigen::ArrayXXd make_mask(Eigen::Index rows, Eigen::Index cols,
                          double keep_fraction, Rng& rng);

struct TeacherSpec {
  int samples = 1000;
  int input_dim = 16;
  std::vector<int> hidden{32, 32};
  int output_dim = 4;
  double noise = 0.0;
};

/// Regression pairs from a fixed random teacher network. The teacher is
/// returned too so tests can reproduce targets exactly when noise is zero.
struct TeacherData {
  TeacherDataset dataset;
  TinyNet teacher;
};

TeacherData synth_teacher_dataset(const TeacherSpec& spec, Rng& rng);

struct CscSynthSpec {
  int image_size = 32;
  int filter_count = 8;
  int filter_dim = 5;
  double code_density = 0.02;  ///< fraction of nonzero code entries per map
  double amplitude = 1.0;
};

/// Image composed as sum_k A_k (*) x_k from known unit-norm filters and
/// sparse codes, returned with the ground truth for oracle tests.
struct CscSynth {
  Eigen::ArrayXXd image;
  FilterBank filters;
  CodeMaps codes;
};

CscSynth synth_csc_image(const CscSynthSpec& spec, Rng& rng);

/// Per-image contrast normalization: subtract the mean, divide by the
/// standard deviation (guarding constant images).
Eigen::ArrayXXd contrast_normalize(const Eigen::ArrayXXd& image);

}  // namespace cogd

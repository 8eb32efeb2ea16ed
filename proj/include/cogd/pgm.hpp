#pragma once

#include <Eigen/Dense>
#include <filesystem>

namespace cogd {

/// Loads a binary (P5) or ASCII (P2) PGM into [0, 1] by dividing by maxval.
/// Distinct IoErrors for a bad magic, a zero or oversized maxval, and a
/// truncated payload.
Eigen::ArrayXXd load_pgm(const std::filesystem::path& path);

/// Saves values clamped to [0, 1] as binary P5 with the given maxval
/// (8-bit up to 255, 16-bit big-endian above). save then load reproduces
/// values within 1/(2 maxval).
void save_pgm(const Eigen::ArrayXXd& image, const std::filesystem::path& path,
              int max_value = 255);

}  // namespace cogd

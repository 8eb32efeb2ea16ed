#pragma once

#include <filesystem>
#include <string>

#include "cogd/config.hpp"

namespace cogd {

/// Runs the configured experiment, writing its records, images and metric
/// tables into output_dir (created if needed). The directory is owned
/// exclusively for the duration of the run via a lock file. Partial records
/// are persisted before a NumericError propagates.
void run_experiment(const ExperimentConfig& cfg,
                    const std::filesystem::path& output_dir);

/// Human-readable summary of every record file in a run directory.
std::string report_run_dir(const std::filesystem::path& run_dir);

}  // namespace cogd

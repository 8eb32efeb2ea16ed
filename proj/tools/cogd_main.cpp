// Command-line front end: run experiments from key=value configs, validate
// configs, and summarize finished run directories.
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 IO failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cogd/config.hpp"
#include "cogd/errors.hpp"
#include "cogd/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cogd::IoError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int load_config(const std::filesystem::path& path,
                const std::vector<std::string>& overrides,
                const std::string& seed_override, cogd::ExperimentConfig& out) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const cogd::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  cogd::ParseResult parsed = cogd::parse_config(text);
  if (!parsed.ok()) {
    for (const auto& issue : parsed.issues) {
      std::cerr << "config error";
      if (issue.line > 0) std::cerr << " (line " << issue.line << ")";
      std::cerr << ": " << issue.message << "\n";
    }
    return kExitConfig;
  }
  out = *parsed.config;

  bool override_failed = false;
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      std::cerr << "config error: --set expects key=value, got '" << item
                << "'\n";
      override_failed = true;
      continue;
    }
    const std::string err =
        cogd::apply_override(out, item.substr(0, eq), item.substr(eq + 1));
    if (!err.empty()) {
      std::cerr << "config error: " << err << "\n";
      override_failed = true;
    }
  }
  if (!seed_override.empty()) {
    const std::string err = cogd::apply_override(out, "seed", seed_override);
    if (!err.empty()) {
      std::cerr << "config error: " << err << "\n";
      override_failed = true;
    }
  }
  return override_failed ? kExitConfig : kExitOk;
}

std::filesystem::path resolve_output_dir(const cogd::ExperimentConfig& cfg,
                                         const std::string& flag_output) {
  std::filesystem::path dir;
  if (!flag_output.empty()) {
    dir = flag_output;
  } else if (!cfg.output_dir.empty()) {
    dir = cfg.output_dir;
  } else {
    dir = std::filesystem::path("runs") /
          (cfg.experiment + "-seed" + std::to_string(cfg.seed));
  }
  if (dir.is_relative()) {
    if (const char* root = std::getenv("COGD_OUTPUT_ROOT"))
      dir = std::filesystem::path(root) / dir;
  }
  return dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cogd: coupled-gradient bilinear optimization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_flag;
  std::string seed_flag;
  std::vector<std::string> set_flags;

  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config file (key=value lines)")
      ->required();
  run->add_option("--output", output_flag, "output directory");
  run->add_option("--seed", seed_flag, "override the seed");
  run->add_option("--set", set_flags, "override a key (key=value)");

  CLI::App* validate = app.add_subcommand("validate", "check a config");
  validate->add_option("config", config_path, "config file")->required();

  std::string report_dir;
  CLI::App* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("run_dir", report_dir, "finished run directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      cogd::ExperimentConfig cfg;
      const int status = load_config(config_path, set_flags, seed_flag, cfg);
      if (status != kExitOk) return status;
      const std::filesystem::path dir = resolve_output_dir(cfg, output_flag);
      cogd::run_experiment(cfg, dir);
      std::cout << "run complete: " << dir.string() << "\n";
      return kExitOk;
    }
    if (validate->parsed()) {
      cogd::ExperimentConfig cfg;
      const int status = load_config(config_path, {}, "", cfg);
      if (status != kExitOk) return status;
      std::cout << "config ok\n" << cogd::serialize_config(cfg);
      return kExitOk;
    }
    if (report->parsed()) {
      std::cout << cogd::report_run_dir(report_dir);
      return kExitOk;
    }
  } catch (const cogd::NumericError& e) {
    std::cerr << "numeric-error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const cogd::IoError& e) {
    std::cerr << "io-error: " << e.what() << "\n";
    return kExitIo;
  } catch (const cogd::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cogd/config.hpp"
#include "cogd/errors.hpp"
#include "cogd/experiments.hpp"
#include "cogd/pgm.hpp"
#include "cogd/rng.hpp"
#include "cogd/run_record.hpp"
#include "cogd/synth.hpp"

using namespace cogd;

namespace {

std::filesystem::path fresh_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("cogd_harness_" + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

std::map<std::string, std::string> dir_contents(
    const std::filesystem::path& dir) {
  std::map<std::string, std::string> contents;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    contents[std::filesystem::relative(entry.path(), dir).string()] =
        std::move(data);
  }
  return contents;
}

}  // namespace

TEST_CASE("minimal config document gets the published defaults") {
  const ParseResult r = parse_config("experiment=beale\nseed=7\n");
  REQUIRE(r.ok());
  CHECK(r.config->seed == 7);
  CHECK(r.config->iterations == 200);
  CHECK(r.config->coupling.alpha_sparse == doctest::Approx(1.0));
  CHECK(r.config->coupling.alpha_dense == doctest::Approx(0.5));
  CHECK(r.config->coupling.beta_scale == doctest::Approx(0.001));
  CHECK(r.config->lr_sgd == doctest::Approx(0.001));
  CHECK(r.config->lr_momentum == doctest::Approx(0.005));
  CHECK(r.config->lr_adam == doctest::Approx(0.1));
}

TEST_CASE("domain violations carry their line numbers") {
  const ParseResult r =
      parse_config("experiment=beale\nkernel_exponent=0\n");
  REQUIRE_FALSE(r.ok());
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].line == 2);
  CHECK(r.issues[0].message.find("kernel_exponent") != std::string::npos);
}

TEST_CASE("unknown experiment lists the valid names") {
  const ParseResult r = parse_config("experiment=unknown\n");
  REQUIRE_FALSE(r.ok());
  CHECK(r.issues[0].message.find("beale") != std::string::npos);
  CHECK(r.issues[0].message.find("csc-inpaint") != std::string::npos);
}

TEST_CASE("every problem is reported, not just the first") {
  const ParseResult r = parse_config(
      "experiment=beale\nbogus_key=1\nperiod=0\nkeep_fraction=2\n");
  REQUIRE_FALSE(r.ok());
  CHECK(r.issues.size() == 3);
}

TEST_CASE("missing experiment key is a document-level issue") {
  const ParseResult r = parse_config("seed=3\n");
  REQUIRE_FALSE(r.ok());
  CHECK(r.issues[0].message.find("experiment") != std::string::npos);
}

TEST_CASE("config serialization round trip") {
  for (const std::string& name : experiment_names()) {
    ExperimentConfig cfg = default_config(name);
    cfg.seed = 42;
    const std::string text = serialize_config(cfg);
    const ParseResult r = parse_config(text);
    REQUIRE(r.ok());
    CHECK(serialize_config(*r.config) == text);
  }
}

TEST_CASE("overrides validate like config lines") {
  ExperimentConfig cfg = default_config("beale");
  CHECK(apply_override(cfg, "seed", "11").empty());
  CHECK(cfg.seed == 11);
  CHECK_FALSE(apply_override(cfg, "nope", "1").empty());
  CHECK_FALSE(apply_override(cfg, "csc_rho", "0").empty());
}

TEST_CASE("comments and blank lines are ignored") {
  const ParseResult r =
      parse_config("# a comment\n\nexperiment=beale\n  seed = 9 \n");
  REQUIRE(r.ok());
  CHECK(r.config->seed == 9);
}

TEST_CASE("ascii pgm parsing") {
  const auto path = fresh_dir("pgm_ascii");
  std::filesystem::create_directories(path);
  const auto file = path / "tiny.pgm";
  {
    std::ofstream out(file);
    out << "P2\n# comment\n2 2\n255\n0 128\n255 64\n";
  }
  const Eigen::ArrayXXd img = load_pgm(file);
  CHECK(img(0, 0) == doctest::Approx(0.0));
  CHECK(img(0, 1) == doctest::Approx(128.0 / 255.0));
  CHECK(img(1, 0) == doctest::Approx(1.0));
  CHECK(img(1, 1) == doctest::Approx(64.0 / 255.0));
  std::filesystem::remove_all(path);
}

TEST_CASE("pgm save and load round trip within the quantization bound") {
  const auto path = fresh_dir("pgm_round");
  std::filesystem::create_directories(path);
  Rng rng(31);
  Eigen::ArrayXXd img(9, 7);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 7; ++c) img(r, c) = rng.uniform();
  const auto file = path / "round.pgm";
  save_pgm(img, file, 255);
  const Eigen::ArrayXXd back = load_pgm(file);
  CHECK((back - img).abs().maxCoeff() <= 1.0 / 510.0 + 1e-12);

  save_pgm(img, file, 65535);
  const Eigen::ArrayXXd wide = load_pgm(file);
  CHECK((wide - img).abs().maxCoeff() <= 1.0 / 131070.0 + 1e-12);
  std::filesystem::remove_all(path);
}

TEST_CASE("pgm error cases are distinct") {
  const auto path = fresh_dir("pgm_bad");
  std::filesystem::create_directories(path);

  const auto p3 = path / "color.pgm";
  {
    std::ofstream out(p3);
    out << "P3\n2 2\n255\n";
  }
  CHECK_THROWS_WITH_AS(load_pgm(p3),
                       doctest::Contains("unsupported PGM magic"), IoError);

  const auto zero = path / "zero.pgm";
  {
    std::ofstream out(zero);
    out << "P2\n1 1\n0\n0\n";
  }
  CHECK_THROWS_WITH_AS(load_pgm(zero), doctest::Contains("maxval is zero"),
                       IoError);

  const auto truncated = path / "short.pgm";
  {
    std::ofstream out(truncated, std::ios::binary);
    out << "P5\n4 4\n255\n";
    out.put(static_cast<char>(1));  // 1 byte instead of 16
  }
  CHECK_THROWS_WITH_AS(load_pgm(truncated), doctest::Contains("truncated"),
                       IoError);
  std::filesystem::remove_all(path);
}

TEST_CASE("masks have an exact kept-pixel count and are seed-stable") {
  Rng a(5), b(5), c(6);
  const Eigen::ArrayXXd full = make_mask(10, 10, 1.0, a);
  CHECK(full.sum() == doctest::Approx(100.0));

  const Eigen::ArrayXXd quarter = make_mask(10, 10, 0.25, b);
  CHECK(quarter.sum() == doctest::Approx(25.0));

  CHECK_THROWS_AS(make_mask(10, 10, 0.0, c), InvalidInput);
  CHECK_THROWS_AS(make_mask(10, 10, 1.5, c), InvalidInput);

  Rng s1(77), s2(77);
  const Eigen::ArrayXXd m1 = make_mask(12, 9, 0.3, s1);
  const Eigen::ArrayXXd m2 = make_mask(12, 9, 0.3, s2);
  CHECK((m1 - m2).abs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic datasets are seeded and honest about their ground truth") {
  // zero-amplitude codes give a zero image
  CscSynthSpec zero;
  zero.amplitude = 0.0;
  Rng r1(8);
  CHECK(synth_csc_image(zero, r1).image.abs().maxCoeff() == 0.0);

  // noise-free teacher targets are exactly reproducible
  TeacherSpec spec;
  spec.samples = 16;
  spec.input_dim = 3;
  spec.hidden = {4};
  spec.output_dim = 2;
  Rng r2(9);
  const TeacherData data = synth_teacher_dataset(spec, r2);
  const Eigen::MatrixXd reproduced =
      forward_masked(data.teacher, data.dataset.inputs);
  CHECK((reproduced - data.dataset.targets).cwiseAbs().maxCoeff() == 0.0);

  // identical seeds, identical datasets
  Rng r3(10), r4(10);
  const TeacherData d1 = synth_teacher_dataset(spec, r3);
  const TeacherData d2 = synth_teacher_dataset(spec, r4);
  CHECK((d1.dataset.inputs - d2.dataset.inputs).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1.dataset.targets - d2.dataset.targets).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("run records survive their own serialization") {
  RunRecord rec;
  rec.set_header("experiment", "beale");
  rec.set_header("note", "contains \"quotes\", commas");
  rec.set_columns({"iter", "value"});
  rec.add_row({1.0, 0.125});
  rec.add_row({2.0, -3.5e-9});
  rec.set_summary("final", 0.125);

  const auto path = fresh_dir("record");
  std::filesystem::create_directories(path);
  const auto file = path / "rec.csv";
  rec.write_csv(file);

  const RunRecord back = RunRecord::read_csv(file);
  CHECK(back.header_value("experiment") == "beale");
  CHECK(back.header_value("note") == "contains \"quotes\", commas");
  REQUIRE(back.columns().size() == 2);
  REQUIRE(back.rows().size() == 2);
  CHECK(back.rows()[0][1] == 0.125);
  CHECK(back.rows()[1][1] == -3.5e-9);
  CHECK(back.summary_value("final") == 0.125);

  // RFC shape: constant column count, LF endings, quoted cells
  std::ifstream in(file, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\r\n") == std::string::npos);
  std::size_t cells_per_line = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::size_t cells = 1;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') quoted = !quoted;
      if (ch == ',' && !quoted) ++cells;
    }
    if (cells_per_line == 0) cells_per_line = cells;
    CHECK(cells == cells_per_line);
    CHECK(line.front() == '"');
  }
  std::filesystem::remove_all(path);
}

TEST_CASE("row width mismatches are rejected") {
  RunRecord rec;
  rec.set_columns({"a", "b"});
  CHECK_THROWS_AS(rec.add_row({1.0}), InvalidInput);
}

TEST_CASE("beale experiment writes the expected artifacts deterministically") {
  ExperimentConfig cfg = default_config("beale");
  cfg.seed = 3;
  cfg.iterations = 25;

  const auto dir1 = fresh_dir("beale1");
  const auto dir2 = fresh_dir("beale2");
  run_experiment(cfg, dir1);
  run_experiment(cfg, dir2);

  for (const char* kind : {"sgd", "momentum", "adam"}) {
    for (const char* variant : {"plain", "cogd"}) {
      CHECK(std::filesystem::exists(
          dir1 / ("beale_" + std::string(kind) + "_" + variant + ".csv")));
    }
  }
  CHECK(std::filesystem::exists(dir1 / "beale_summary.csv"));
  CHECK_FALSE(std::filesystem::exists(dir1 / ".cogd-lock"));

  const auto c1 = dir_contents(dir1);
  const auto c2 = dir_contents(dir2);
  REQUIRE(c1.size() == c2.size());
  for (const auto& [name, bytes] : c1) {
    REQUIRE(c2.count(name) == 1);
    CHECK(bytes == c2.at(name));
  }
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("a live lock blocks a second run") {
  ExperimentConfig cfg = default_config("beale");
  cfg.iterations = 5;
  const auto dir = fresh_dir("locked");
  std::filesystem::create_directories(dir);
  {
    std::ofstream lock(dir / ".cogd-lock");
  }
  CHECK_THROWS_AS(run_experiment(cfg, dir), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("csc inpaint experiment emits images and metrics") {
  ExperimentConfig cfg = default_config("csc-inpaint");
  cfg.seed = 5;
  cfg.csc_image_size = 16;
  cfg.csc_filters = 3;
  cfg.csc_filter_size = 3;
  cfg.csc_outer_iters = 3;
  cfg.csc_inpaint_passes = 10;
  cfg.csc_cg_iters = 40;

  const auto dir = fresh_dir("inpaint");
  run_experiment(cfg, dir);
  for (const char* name : {"csc_trace.csv", "metrics.csv", "clean.pgm",
                           "observed.pgm", "mask.pgm", "inpainted.pgm"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  const RunRecord metrics = RunRecord::read_csv(dir / "metrics.csv");
  CHECK(std::isfinite(metrics.summary_value("psnr_db")));
  CHECK(metrics.summary_value("ssim") <= 1.0);

  const std::string report = report_run_dir(dir);
  CHECK(report.find("csc-inpaint") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("prune-toy experiment writes a reloadable model dump") {
  ExperimentConfig cfg = default_config("prune-toy");
  cfg.seed = 6;
  cfg.toy_samples = 64;
  cfg.toy_epochs = 5;
  cfg.toy_hidden = 8;

  const auto dir = fresh_dir("prune");
  run_experiment(cfg, dir);
  CHECK(std::filesystem::exists(dir / "toy_trace.csv"));
  CHECK(std::filesystem::exists(dir / "model.txt"));
  const RunRecord rec = RunRecord::read_csv(dir / "toy_trace.csv");
  CHECK(rec.rows().size() == 5);
  std::filesystem::remove_all(dir);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cogd/beale.hpp"
#include "cogd/bilinear_lsq.hpp"
#include "cogd/errors.hpp"
#include "cogd/rng.hpp"

using namespace cogd;

namespace {

BilinearLSQ identity_problem() {
  BilinearLSQ p;
  p.a_matrix = Eigen::MatrixXd::Identity(2, 2);
  p.x_vector.resize(2);
  p.x_vector << 1, 0;
  p.b_obs.resize(2);
  p.b_obs << 1, 1;
  p.lambda_sparse = 0.1;
  return p;
}

BilinearLSQ random_problem(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  BilinearLSQ p;
  p.a_matrix.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) p.a_matrix(r, c) = rng.normal();
  p.x_vector.resize(cols);
  for (Eigen::Index c = 0; c < cols; ++c) p.x_vector[c] = rng.normal();
  p.b_obs.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) p.b_obs[r] = rng.normal();
  p.lambda_sparse = rng.uniform(0.0, 0.5);
  p.dense_reg_weight = rng.uniform(0.0, 0.2);
  return p;
}

}  // namespace

TEST_CASE("objective examples") {
  BilinearLSQ p = identity_problem();
  CHECK(lsq_objective(p) == doctest::Approx(0.6));

  p.x_vector.setZero();
  p.b_obs.setZero();
  CHECK(lsq_objective(p) == doctest::Approx(0.0));

  p = identity_problem();
  p.x_vector << 1, 1;
  p.lambda_sparse = 0.5;
  CHECK(lsq_objective(p) == doctest::Approx(1.0));
}

TEST_CASE("ghat is the residual") {
  BilinearLSQ p = identity_problem();
  Eigen::VectorXd g = lsq_ghat(p);
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(-1.0));

  p.x_vector.setZero();
  g = lsq_ghat(p);
  CHECK(g.isApprox(-p.b_obs));

  p = identity_problem();
  p.b_obs = p.a_matrix * p.x_vector;
  CHECK(lsq_ghat(p).norm() == doctest::Approx(0.0));
}

TEST_CASE("grad_a example and structural zeros") {
  BilinearLSQ p = identity_problem();
  p.lambda_sparse = 0.0;
  const Eigen::MatrixXd g = lsq_grad_a(p);
  CHECK(g(0, 0) == doctest::Approx(0.0));
  CHECK(g(0, 1) == doctest::Approx(0.0));
  CHECK(g(1, 0) == doctest::Approx(-1.0));
  CHECK(g(1, 1) == doctest::Approx(0.0));

  p.x_vector.setZero();
  CHECK(lsq_grad_a(p).norm() == doctest::Approx(0.0));

  p = identity_problem();
  p.b_obs = p.a_matrix * p.x_vector;
  CHECK(lsq_grad_a(p).norm() == doctest::Approx(0.0));
}

TEST_CASE("grad_x examples") {
  BilinearLSQ p = identity_problem();
  p.lambda_sparse = 0.0;
  Eigen::VectorXd g = lsq_grad_x(p);
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(-1.0));

  // pure subgradient with sign(0) = 0
  p.a_matrix.setZero();
  p.b_obs.setZero();
  p.lambda_sparse = 1.0;
  p.x_vector << 2, -3;
  g = lsq_grad_x(p);
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(-1.0));

  p.x_vector.setZero();
  CHECK(lsq_grad_x(p).norm() == doctest::Approx(0.0));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(101);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const Eigen::Index rows = 2 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::Index cols = 2 + static_cast<Eigen::Index>(rng.below(4));
    BilinearLSQ p = random_problem(rng, rows, cols);
    // keep clear of the L1 kink
    bool near_kink = false;
    for (Eigen::Index j = 0; j < cols; ++j)
      if (std::abs(p.x_vector[j]) < 1e-3) near_kink = true;
    if (near_kink) continue;
    ++checked;

    const double h = 1e-6;
    const Eigen::MatrixXd ga = lsq_grad_a(p);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        BilinearLSQ plus = p, minus = p;
        plus.a_matrix(r, c) += h;
        minus.a_matrix(r, c) -= h;
        const double fd =
            (lsq_objective(plus) - lsq_objective(minus)) / (2 * h);
        CHECK(std::abs(fd - ga(r, c)) <=
              1e-5 * std::max(1.0, std::abs(ga(r, c))));
      }
    }
    const Eigen::VectorXd gx = lsq_grad_x(p);
    for (Eigen::Index j = 0; j < cols; ++j) {
      BilinearLSQ plus = p, minus = p;
      plus.x_vector[j] += h;
      minus.x_vector[j] -= h;
      const double fd = (lsq_objective(plus) - lsq_objective(minus)) / (2 * h);
      CHECK(std::abs(fd - gx[j]) <= 1e-5 * std::max(1.0, std::abs(gx[j])));
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("objective is invariant under coordinate permutations") {
  Rng rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    BilinearLSQ p = random_problem(rng, 5, 4);
    const double before = lsq_objective(p);
    // rotate coordinates by one; the same permutation on x and A's columns
    BilinearLSQ q = p;
    for (Eigen::Index j = 0; j < 4; ++j) {
      q.x_vector[j] = p.x_vector[(j + 1) % 4];
      q.a_matrix.col(j) = p.a_matrix.col((j + 1) % 4);
    }
    CHECK(lsq_objective(q) == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("gradient descent decreases the objective at a small step size") {
  Rng rng(77);
  BilinearLSQ p = random_problem(rng, 6, 4);
  p.lambda_sparse = 0.05;
  double last = lsq_objective(p);
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd gx = lsq_grad_x(p);
    const Eigen::MatrixXd ga = lsq_grad_a(p);
    p.x_vector -= 1e-3 * gx;
    p.a_matrix -= 1e-3 * ga;
    const double now = lsq_objective(p);
    CHECK(now <= last + 1e-9);
    last = now;
  }
}

TEST_CASE("beale examples") {
  BealeProblem bp;
  bp.x1 = 3.0;
  bp.x2 = 0.5;
  CHECK(beale_value(bp) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(beale_objective(bp) == doctest::Approx(3.25));
}

TEST_CASE("beale gradient matches central finite differences") {
  Rng rng(303);
  int checked = 0;
  while (checked < 100) {
    BealeProblem bp;
    bp.x1 = rng.uniform(-4.0, 4.0);
    bp.x2 = rng.uniform(-2.0, 2.0);
    if (std::abs(bp.x1) < 1e-3) continue;
    ++checked;
    const auto [g1, g2] = beale_gradient(bp);
    const double h = 1e-6;
    BealeProblem plus = bp, minus = bp;
    plus.x1 += h;
    minus.x1 -= h;
    const double fd1 = (beale_objective(plus) - beale_objective(minus)) / (2 * h);
    plus = bp;
    minus = bp;
    plus.x2 += h;
    minus.x2 -= h;
    const double fd2 = (beale_objective(plus) - beale_objective(minus)) / (2 * h);
    CHECK(std::abs(fd1 - g1) <= 1e-5 * std::max(1.0, std::abs(g1)));
    CHECK(std::abs(fd2 - g2) <= 1e-5 * std::max(1.0, std::abs(g2)));
  }
}

TEST_CASE("beale comparison runs 200 iterations for six configurations") {
  BealeRunConfig cfg;
  const auto results = run_beale_comparison(cfg);
  REQUIRE(results.size() == 6);
  for (const auto& r : results) {
    CHECK_FALSE(r.diverged);
    CHECK(r.trace.size() == 200);
  }
}

TEST_CASE("beale cogd arm with a closed gate matches the plain arm exactly") {
  BealeRunConfig cfg;
  cfg.coupling.alpha_dense = 1e300;  // the dense side can never pass
  const auto results = run_beale_comparison(cfg);
  for (std::size_t i = 0; i < results.size(); i += 2) {
    const auto& plain = results[i];
    const auto& wrapped = results[i + 1];
    REQUIRE(plain.trace.size() == wrapped.trace.size());
    CHECK(wrapped.gate_fires == 0);
    for (std::size_t t = 0; t < plain.trace.size(); ++t) {
      for (int c = 0; c < 6; ++c) CHECK(plain.trace[t][c] == wrapped.trace[t][c]);
    }
  }
}

TEST_CASE("shape validation") {
  BilinearLSQ p = identity_problem();
  p.b_obs.resize(3);
  CHECK_THROWS_AS(lsq_objective(p), InvalidInput);
}

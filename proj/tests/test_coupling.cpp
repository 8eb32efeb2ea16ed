#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cogd/coupling.hpp"
#include "cogd/errors.hpp"
#include "cogd/rng.hpp"

using namespace cogd;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Eigen::VectorXd random_vec(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

Eigen::MatrixXd random_mat(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("sparsity indicator thresholds") {
  CHECK_FALSE(sparsity_indicator(vec({0.2, -0.3}), 1.0, NormKind::L1));
  CHECK(sparsity_indicator(vec({0.0, 0.0, 0.0}), 0.0, NormKind::L1));
  // norm exactly at the threshold counts, the comparison is inclusive
  CHECK(sparsity_indicator(vec({3.0, 4.0}), 5.0, NormKind::L2));
  CHECK_THROWS_AS(sparsity_indicator(Eigen::VectorXd(), 1.0, NormKind::L1),
                  InvalidInput);
  CHECK_THROWS_AS(sparsity_indicator(vec({1.0}), -0.5, NormKind::L1),
                  InvalidInput);
}

TEST_CASE("asynchrony gate truth table") {
  CouplingConfig cfg;
  cfg.alpha_sparse = 1.0;
  cfg.alpha_dense = 1.0;
  const Eigen::VectorXd small = vec({0.25});
  const Eigen::VectorXd large = vec({2.0});
  // (s(x), s(A)) -> fire only at (0, 1)
  CHECK(asynchrony_gate(small, large, cfg).fire);
  CHECK_FALSE(asynchrony_gate(large, large, cfg).fire);
  CHECK_FALSE(asynchrony_gate(small, small, cfg).fire);
  CHECK_FALSE(asynchrony_gate(large, small, cfg).fire);

  const GateDecision d = asynchrony_gate(small, large, cfg);
  CHECK(d.sparse_is_small);
  CHECK(d.dense_is_large);
  CHECK(d.fire == (d.sparse_is_small && d.dense_is_large));
}

TEST_CASE("coupling coefficient examples") {
  Eigen::MatrixXd col(2, 1);
  col << 1, 0;
  CHECK(coupling_coefficient(vec({1, 2}), col, 1)[0] == doctest::Approx(1.0));
  col << 0, 1;
  CHECK(coupling_coefficient(vec({1, 2}), col, 2)[0] == doctest::Approx(4.0));
  col << 1, 1;
  CHECK(coupling_coefficient(vec({1, -1}), col, 3)[0] == doctest::Approx(0.0));

  Eigen::MatrixXd bad(3, 1);
  bad.setOnes();
  CHECK_THROWS_AS(coupling_coefficient(vec({1, 2}), bad, 1), InvalidInput);
}

TEST_CASE("coupling coefficient kernel properties") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(6));
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(5));
    const Eigen::VectorXd ghat = random_vec(rng, m);
    const Eigen::MatrixXd response = random_mat(rng, m, n);

    // k = 1 reduces to the plain inner products
    const Eigen::VectorXd c1 = coupling_coefficient(ghat, response, 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      double dot = 0;
      for (Eigen::Index i = 0; i < m; ++i) dot += ghat[i] * response(i, j);
      CHECK(c1[j] == doctest::Approx(dot).epsilon(1e-12));
    }

    // odd kernels are odd in ghat, even kernels are nonnegative
    const Eigen::VectorXd c3 = coupling_coefficient(ghat, response, 3);
    const Eigen::VectorXd c3n = coupling_coefficient(-ghat, response, 3);
    for (Eigen::Index j = 0; j < n; ++j)
      CHECK(c3[j] == doctest::Approx(-c3n[j]).epsilon(1e-10));
    const Eigen::VectorXd c2 = coupling_coefficient(ghat, response, 2);
    for (Eigen::Index j = 0; j < n; ++j) CHECK(c2[j] >= 0.0);
  }
}

TEST_CASE("finite difference coupling") {
  // plain elementwise division
  Eigen::MatrixXd a_curr(2, 1), a_prev(2, 1);
  a_curr << 3, 5;
  a_prev << 1, 1;
  const Eigen::MatrixXd r = finite_difference_coupling(
      a_curr, a_prev, vec({2.5}), vec({0.5}), 1e-8);
  CHECK(r(0, 0) == doctest::Approx(1.0));
  CHECK(r(1, 0) == doctest::Approx(2.0));

  // dx = 0 -> column of ones
  const Eigen::MatrixXd r0 = finite_difference_coupling(
      a_curr, a_prev, vec({0.5}), vec({0.5}), 1e-8);
  CHECK(r0(0, 0) == 1.0);
  CHECK(r0(1, 0) == 1.0);

  // x_curr below the guard -> column of ones
  const Eigen::MatrixXd rg = finite_difference_coupling(
      a_curr, a_prev, vec({1e-12}), vec({1.0}), 1e-8);
  CHECK(rg(0, 0) == 1.0);
  CHECK(rg(1, 0) == 1.0);

  CHECK_THROWS_AS(finite_difference_coupling(a_curr, Eigen::MatrixXd(3, 1),
                                             vec({1.0}), vec({0.0}), 1e-8),
                  InvalidInput);
}

TEST_CASE("finite difference coupling never produces non-finite values") {
  Rng rng(3);
  const double deltas[] = {0.0, 1e-12, -1e-12, 1e-9, -1e-9, 0.5, -2.0};
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(4));
    Eigen::VectorXd x_prev = random_vec(rng, n);
    Eigen::VectorXd x_curr = x_prev;
    for (Eigen::Index j = 0; j < n; ++j)
      x_curr[j] += deltas[rng.below(7)];
    if (trial % 3 == 0) x_curr.setZero();
    const Eigen::MatrixXd result = finite_difference_coupling(
        random_mat(rng, m, n), random_mat(rng, m, n), x_curr, x_prev, 1e-8);
    CHECK(result.allFinite());
  }
}

TEST_CASE("projection combines iterates elementwise") {
  CHECK(project(vec({1, 2}), vec({3, 4}), vec({0, 0})).isApprox(vec({1, 2})));
  CHECK(project(vec({1, 2}), vec({1, 1}), vec({0.5, 0.5}))
            .isApprox(vec({1.5, 2.5})));
  CHECK(project(vec({0, 0}), vec({2, -2}), vec({1, 1}))
            .isApprox(vec({2, -2})));
  CHECK_THROWS_AS(project(vec({1}), vec({1, 2}), vec({1})), InvalidInput);
}

namespace {

CouplingCoordinator make_coordinator(const CouplingConfig& cfg, double x0,
                                     double a0, double lr) {
  EpochSnapshot snap;
  snap.x_prev = vec({x0});
  snap.a_prev = Eigen::MatrixXd::Constant(1, 1, a0);
  snap.learning_rate = lr;
  return CouplingCoordinator(cfg, snap);
}

}  // namespace

TEST_CASE("cogd step leaves x untouched when the gate stays closed") {
  CouplingConfig cfg;
  cfg.alpha_sparse = 0.0;  // s(x) always 1, so the gate can never fire
  auto coordinator = make_coordinator(cfg, 1.0, 1.0, 0.1);
  Rng rng(5);
  for (int epoch = 1; epoch <= 20; ++epoch) {
    const Eigen::VectorXd x_next = random_vec(rng, 1);
    const StepResult r = coordinator.step(
        x_next, Eigen::MatrixXd::Constant(1, 1, rng.normal()),
        random_vec(rng, 1), epoch);
    CHECK_FALSE(r.gate.fire);
    CHECK(r.x[0] == x_next[0]);  // bitwise
  }
  CHECK(coordinator.fire_count() == 0);
}

TEST_CASE("cogd step with zero beta scale is the identity on x_next") {
  CouplingConfig cfg;
  cfg.beta_scale = 0.0;
  cfg.alpha_sparse = 10.0;  // |x| < 10 -> sparse side small
  cfg.alpha_dense = 0.0;    // dense side always large
  Rng rng(17);
  auto coordinator = make_coordinator(cfg, rng.normal(), rng.normal(), 0.5);
  for (int epoch = 1; epoch <= 50; ++epoch) {
    const Eigen::VectorXd x_next = random_vec(rng, 1);
    const StepResult r = coordinator.step(
        x_next, Eigen::MatrixXd::Constant(1, 1, rng.normal()),
        random_vec(rng, 1), epoch);
    CHECK(r.gate.fire);  // the gate fires, the backtrack is degenerate
    CHECK(r.x[0] == x_next[0]);
  }
}

TEST_CASE("cogd step one-dimensional backtrack against a scalar oracle") {
  // Chosen so ghat * (delta_a / delta_x) = 2 with learning rate 0.1:
  // beta = 0.001 * 0.1 * 2 = 0.0002 and the result is 0.1 + 0.0002 * 1.0.
  CouplingConfig cfg;
  cfg.beta_scale = 0.001;
  cfg.kernel_exponent = 1;
  cfg.alpha_sparse = 1.0;
  cfg.alpha_dense = 0.5;
  auto coordinator = make_coordinator(cfg, 1.0, 0.5, 0.1);

  const double x_next = 0.1;
  const double a_curr = 1.5;
  const double ghat = 2.0 * (x_next - 1.0) / (a_curr - 0.5);

  // independent scalar composition
  const double response = (a_curr - 0.5) / (x_next - 1.0);
  const double coefficient = ghat * response;
  const double beta = 0.001 * 0.1 * coefficient;
  const double expected = x_next + beta * 1.0;
  CHECK(expected == doctest::Approx(0.1002).epsilon(1e-12));

  const StepResult r = coordinator.step(
      vec({x_next}), Eigen::MatrixXd::Constant(1, 1, a_curr), vec({ghat}), 1);
  CHECK(r.gate.fire);
  CHECK(r.x[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("snapshot refreshes once per period") {
  CouplingConfig cfg;
  cfg.period = 2;
  cfg.alpha_sparse = 0.0;  // never fires; only the refresh schedule matters
  auto coordinator = make_coordinator(cfg, 7.0, 7.0, 1.0);

  coordinator.step(vec({1.0}), Eigen::MatrixXd::Constant(1, 1, 2.0),
                   vec({0.0}), 1);
  CHECK(coordinator.snapshot().x_prev[0] == 7.0);  // off-period, untouched
  coordinator.step(vec({3.0}), Eigen::MatrixXd::Constant(1, 1, 4.0),
                   vec({0.0}), 2);
  CHECK(coordinator.snapshot().x_prev[0] == 3.0);
  CHECK(coordinator.snapshot().a_prev(0, 0) == 4.0);
}

TEST_CASE("epochs must increase strictly") {
  CouplingConfig cfg;
  auto coordinator = make_coordinator(cfg, 1.0, 1.0, 1.0);
  coordinator.step(vec({1.0}), Eigen::MatrixXd::Constant(1, 1, 1.0),
                   vec({0.0}), 3);
  CHECK_THROWS_AS(coordinator.step(vec({1.0}),
                                   Eigen::MatrixXd::Constant(1, 1, 1.0),
                                   vec({0.0}), 3),
                  InvalidInput);
}

TEST_CASE("identical inputs give bit-identical outputs") {
  CouplingConfig cfg;
  cfg.alpha_sparse = 10.0;
  cfg.alpha_dense = 0.0;
  Rng rng(23);
  const Eigen::VectorXd x_next = random_vec(rng, 4);
  const Eigen::MatrixXd a_curr = random_mat(rng, 3, 4);
  const Eigen::VectorXd ghat = random_vec(rng, 3);

  EpochSnapshot snap;
  snap.x_prev = random_vec(rng, 4);
  snap.a_prev = random_mat(rng, 3, 4);
  snap.learning_rate = 0.25;
  CouplingCoordinator c1(cfg, snap);
  CouplingCoordinator c2(cfg, snap);
  const StepResult r1 = c1.step(x_next, a_curr, ghat, 1);
  const StepResult r2 = c2.step(x_next, a_curr, ghat, 1);
  for (Eigen::Index i = 0; i < r1.x.size(); ++i) CHECK(r1.x[i] == r2.x[i]);
}

TEST_CASE("config validation") {
  CouplingConfig cfg;
  cfg.kernel_exponent = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = CouplingConfig{};
  cfg.period = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = CouplingConfig{};
  cfg.beta_scale = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "smoothcruiser/environments.hpp"
#include "smoothcruiser/exact_solver.hpp"

using namespace smoothcruiser;

namespace {

TabularMdp single_state(double reward, std::size_t actions) {
  TabularMdp m;
  m.n_states = 1;
  m.n_actions = actions;
  m.transition.assign(actions, 1.0);
  m.reward_mean.assign(actions, reward);
  return m;
}

double measured_residual(const TabularMdp& m, const SmoothOperator& op,
                         double gamma, const ValueTable& t) {
  double worst = 0.0;
  for (std::size_t s = 0; s < m.n_states; ++s) {
    QVector q(m.n_actions);
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      double ev = 0.0;
      for (std::size_t z = 0; z < m.n_states; ++z) ev += m.p(s, a, z) * t.v[z];
      q[a] = m.r(s, a) + gamma * ev;
    }
    worst = std::max(worst, std::abs(op.value(q) - t.v[s]));
  }
  return worst;
}

}  // namespace

TEST_CASE("single-state regularized closed form") {
  const TabularMdp m = single_state(1.0, 2);
  const auto op = SmoothOperator::logsumexp_max(1.0, 2);
  const ValueTable t = solve_regularized(m, op, 0.5, 1e-12);
  // V = (r + lambda ln K) / (1 - gamma)
  CHECK(t.v[0] == Catch::Approx((1.0 + std::log(2.0)) / 0.5).margin(1e-10));
  CHECK(t.v[0] == Catch::Approx(3.386294361119891).margin(1e-10));
  CHECK(t.q[0][0] == Catch::Approx(1.0 + 0.5 * t.v[0]).margin(1e-10));
}

TEST_CASE("all-zero rewards give the pure regularization value") {
  TabularMdp m = build_env(EnvSpec::parse("chain:4"));
  for (double& r : m.reward_mean) r = 0.0;
  const auto op = SmoothOperator::logsumexp_max(2.0, 2);
  const ValueTable t = solve_regularized(m, op, 0.3, 1e-12);
  for (double v : t.v) {
    CHECK(v == Catch::Approx(2.0 * std::log(2.0) / 0.7).margin(1e-10));
  }
  const ValueTable hard = solve_unregularized(m, 0.3, 1e-12);
  for (double v : hard.v) CHECK(v == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("single-state unregularized geometric series") {
  const TabularMdp m = single_state(1.0, 2);
  const ValueTable t = solve_unregularized(m, 0.5, 1e-12);
  CHECK(t.v[0] == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("regularization gap equality on the single-state model") {
  const TabularMdp m = single_state(1.0, 2);
  const auto op = SmoothOperator::logsumexp_max(1.0, 2);
  const double v_reg = solve_regularized(m, op, 0.5, 1e-12).v[0];
  const double v_hard = solve_unregularized(m, 0.5, 1e-12).v[0];
  CHECK(v_reg - v_hard == Catch::Approx(std::log(2.0) / 0.5).margin(1e-10));
}

TEST_CASE("residual bound holds on the benchmark environments") {
  for (const char* name : {"chain:5", "gridworld:5"}) {
    const TabularMdp m = build_env(EnvSpec::parse(name));
    const auto op = SmoothOperator::logsumexp_max(10.0, m.n_actions);
    const ValueTable t = solve_regularized(m, op, 0.2, 1e-10);
    INFO(name);
    CHECK(t.residual <= 1e-10);
    CHECK(measured_residual(m, op, 0.2, t) <= 1e-10);
    // value bound 0 <= v <= (1 + M)/(1 - gamma) + tol
    const double vmax = (1.0 + op.zero_offset_bound()) / 0.8;
    for (double v : t.v) {
      CHECK(v >= 0.0);
      CHECK(v <= vmax + 1e-10);
    }
  }
}

TEST_CASE("regularization gap bound on benchmark environments") {
  for (const char* name : {"chain:5", "gridworld:5"}) {
    const TabularMdp m = build_env(EnvSpec::parse(name));
    const double lambda = 10.0;
    const double gamma = 0.2;
    const auto op = SmoothOperator::logsumexp_max(lambda, m.n_actions);
    const ValueTable reg = solve_regularized(m, op, gamma, 1e-10);
    const ValueTable hard = solve_unregularized(m, gamma, 1e-10);
    double gap = 0.0;
    for (std::size_t s = 0; s < m.n_states; ++s) {
      gap = std::max(gap, std::abs(reg.v[s] - hard.v[s]));
    }
    INFO(name);
    CHECK(gap <= lambda * std::log(double(m.n_actions)) / (1.0 - gamma) +
                     2e-10);
  }
}

TEST_CASE("iterates contract at rate gamma") {
  const TabularMdp m = build_env(EnvSpec::parse("gridworld:4"));
  const auto op = SmoothOperator::logsumexp_max(1.0, 4);
  const double gamma = 0.6;
  const ValueTable t = solve_regularized(m, op, gamma, 1e-10);
  REQUIRE(t.iterate_deltas.size() >= 3);
  for (std::size_t i = 1; i + 1 < t.iterate_deltas.size(); ++i) {
    CHECK(t.iterate_deltas[i + 1] <= gamma * t.iterate_deltas[i] + 1e-14);
  }
}

TEST_CASE("monotone envelope at the fixed point") {
  const TabularMdp m = build_env(EnvSpec::parse("chain:5"));
  const double lambda = 3.0;
  const auto op = SmoothOperator::logsumexp_max(lambda, 2);
  const ValueTable t = solve_regularized(m, op, 0.4, 1e-11);
  for (std::size_t s = 0; s < m.n_states; ++s) {
    const double qmax = *std::max_element(t.q[s].begin(), t.q[s].end());
    CHECK(t.v[s] >= qmax - 1e-11);
    CHECK(t.v[s] <= qmax + lambda * std::log(2.0) + 1e-11);
  }
}

TEST_CASE("solver input validation") {
  const TabularMdp m = single_state(1.0, 2);
  const auto op = SmoothOperator::logsumexp_max(1.0, 2);
  CHECK_THROWS_AS(solve_regularized(m, op, 1.0, 1e-10), Error);
  CHECK_THROWS_AS(solve_regularized(m, op, -0.1, 1e-10), Error);
  CHECK_THROWS_AS(solve_regularized(m, op, 0.5, 0.0), Error);
  const auto wrong = SmoothOperator::logsumexp_max(1.0, 3);
  CHECK_THROWS_AS(solve_regularized(m, wrong, 0.5, 1e-10), Error);
  // gamma = 0 works: V = F(R)
  const ValueTable t = solve_regularized(m, op, 0.0, 1e-10);
  CHECK(t.v[0] == Catch::Approx(op.value({1.0, 1.0})).margin(1e-12));
}

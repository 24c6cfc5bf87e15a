// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "smoothcruiser/smoothcruiser.hpp"

using namespace smoothcruiser;

namespace {

struct Gate {
  int failures = 0;

  template <typename Fn>
  void criterion(int index, const char* label, double time_limit_s, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      ok = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (elapsed > time_limit_s) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string("over time limit");
    }
    if (!ok) ++failures;
    std::printf("criterion %d (%s): %s [%.1fs]%s%s\n", index, label,
                ok ? "PASS" : "FAIL", elapsed, detail.empty() ? "" : " -- ",
                detail.c_str());
    std::fflush(stdout);
  }
};

bool almost(double a, double b, double tol) { return std::abs(a - b) <= tol; }

QVector random_q(RngStream& rng, std::size_t k, double lo, double hi) {
  QVector q(k);
  for (double& x : q) x = rng.uniform(lo, hi);
  return q;
}

// |F(a) - F(b) - (a-b).grad F(b)| <= L ||a-b||^2 + slack over random pairs.
bool smoothness_suite(const SmoothOperator& op, std::string& detail) {
  RngStream rng(17);
  const std::size_t k = op.num_actions();
  for (int trial = 0; trial < 10'000; ++trial) {
    QVector b = random_q(rng, k, 0.0, 10.0);
    QVector a(k);
    const bool local = (trial % 2) == 0;
    double d2 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      a[i] = local ? std::clamp(b[i] + rng.uniform(-0.2, 0.2), 0.0, 10.0)
                   : rng.uniform(0.0, 10.0);
      d2 += (a[i] - b[i]) * (a[i] - b[i]);
    }
    const QVector g = op.gradient(b);
    double lin = op.value(b);
    for (std::size_t i = 0; i < k; ++i) lin += (a[i] - b[i]) * g[i];
    if (std::abs(op.value(a) - lin) > op.smoothness() * d2 + 1e-9) {
      detail = "smoothness violation at trial " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

bool gradient_suite(const SmoothOperator& op, std::string& detail) {
  RngStream rng(23);
  const std::size_t k = op.num_actions();
  const double h = 1e-6;
  for (int trial = 0; trial < 200; ++trial) {
    const QVector q = random_q(rng, k, 0.0, 4.0);
    const QVector g = op.gradient(q);
    double l1 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      QVector up = q, dn = q;
      up[i] += h;
      dn[i] -= h;
      const double fd = (op.value(up) - op.value(dn)) / (2.0 * h);
      if (std::abs(fd - g[i]) > 1e-6 * std::abs(g[i])) {
        detail = "gradient mismatch, component " + std::to_string(i);
        return false;
      }
      l1 += g[i];
    }
    const bool l1_ok = op.kind() == OperatorKind::sqrt_reg
                           ? (l1 > 0.0 && l1 <= 1.0 + 1e-10)
                           : almost(l1, 1.0, 1e-12);
    if (!l1_ok) {
      detail = "gradient l1-norm out of range: " + std::to_string(l1);
      return false;
    }
    if (op.kind() != OperatorKind::sqrt_reg) {
      const double gap = op.max_approx_gap(q);
      if (gap < 0.0 ||
          gap > op.temperature() * std::log(double(k)) + 1e-12) {
        detail = "max-gap out of range";
        return false;
      }
    }
  }
  return true;
}

}  // namespace

int main() {
  Gate gate;

  gate.criterion(1, "operator suite", 10.0, [](std::string& detail) {
    const auto ops = {SmoothOperator::logsumexp_max(2.0, 3),
                      SmoothOperator::logsumexp_min(2.0, 3),
                      SmoothOperator::sqrt_reg(2.0, 3)};
    for (const auto& op : ops) {
      if (!smoothness_suite(op, detail)) return false;
      if (!gradient_suite(op, detail)) return false;
    }
    return true;
  });

  gate.criterion(2, "exact solver", 5.0, [](std::string& detail) {
    TabularMdp single;
    single.n_states = 1;
    single.n_actions = 2;
    single.transition = {1.0, 1.0};
    single.reward_mean = {1.0, 1.0};
    const auto op1 = SmoothOperator::logsumexp_max(1.0, 2);
    const double v = solve_regularized(single, op1, 0.5, 1e-12).v[0];
    if (!almost(v, (1.0 + std::log(2.0)) / 0.5, 1e-10)) {
      detail = "single-state closed form mismatch";
      return false;
    }
    const double v0 = solve_unregularized(single, 0.5, 1e-12).v[0];
    if (!almost(v - v0, std::log(2.0) / 0.5, 1e-10)) {
      detail = "single-state gap is not exactly lambda ln K/(1-gamma)";
      return false;
    }
    for (const char* name : {"chain:5", "gridworld:5"}) {
      const EnvSpec spec = EnvSpec::parse(name);
      const TabularMdp m = build_env(spec);
      const auto op = SmoothOperator::logsumexp_max(10.0, m.n_actions);
      const ValueTable reg = solve_regularized(m, op, 0.2, 1e-10);
      if (reg.residual > 1e-10) {
        detail = std::string(name) + ": residual above 1e-10";
        return false;
      }
      const ValueTable hard = solve_unregularized(m, 0.2, 1e-10);
      double gap = 0.0;
      for (std::size_t s = 0; s < m.n_states; ++s) {
        gap = std::max(gap, std::abs(reg.v[s] - hard.v[s]));
      }
      if (gap > 10.0 * std::log(double(m.n_actions)) / 0.8 + 2e-10) {
        detail = std::string(name) + ": regularization gap bound violated";
        return false;
      }
    }
    return true;
  });

  gate.criterion(3, "call-count determinism", 120.0, [](std::string& detail) {
    const TabularMdp m = build_env(EnvSpec::parse("chain:5"));
    const auto op = SmoothOperator::logsumexp_max(10.0, 2);
    for (double eps : {2.0, 1.2, 0.76}) {
      std::uint64_t counts[2];
      std::uint64_t predicted = 0;
      for (int i = 0; i < 2; ++i) {
        PlannerConfig cfg;
        cfg.gamma = 0.04;
        cfg.delta_prime = 0.5;
        cfg.seed = 1000 + std::uint64_t(i);
        const Planner planner(cfg, op);
        GenerativeOracle oracle(m, cfg.seed);
        const PlanResult r = planner.plan(oracle, 0, eps);
        counts[i] = r.oracle_calls;
        predicted = r.predicted_calls;
      }
      if (counts[0] != counts[1] || counts[0] != predicted) {
        detail = "calls depend on the seed or miss the prediction at eps=" +
                 std::to_string(eps);
        return false;
      }
      if (counts[0] >= 100'000'000ULL) {
        detail = "call count not shallow at eps=" + std::to_string(eps);
        return false;
      }
    }
    return true;
  });

  gate.criterion(4, "recursion-count curve", 60.0, [](std::string& detail) {
    const ComplexityModel model(BoundInputs::logsumexp(0.2, 0.1, 2, 0.1));
    const DerivedConstants& d = model.derived();
    for (double eps : model.default_eps_grid()) {
      if (eps <= d.kappa &&
          model.sim_recurrence(eps) > model.bound_small_eps(eps)) {
        detail = "bound violated at eps=" + std::to_string(eps);
        return false;
      }
    }
    // log-log slope of the per-sample call count over [kappa/100, kappa/10]
    std::vector<double> xs, ys;
    for (int i = 0; i <= 12; ++i) {
      const double eps =
          d.kappa / 10.0 * std::pow(0.1, double(i) / 12.0);
      xs.push_back(std::log(1.0 / eps));
      ys.push_back(std::log(double(predicted_sample_calls_approx(d, eps))));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (slope < 3.5 || slope > 4.7) {
      detail = "slope " + std::to_string(slope) + " outside [3.5, 4.7]";
      return false;
    }
    return true;
  });

  gate.criterion(5, "regularization sweep", 60.0, [](std::string& detail) {
    std::vector<double> grid(20);
    const double lo = std::log(1e-3), hi = std::log(100.0);
    for (int i = 0; i < 20; ++i) {
      grid[i] = std::exp(lo + (hi - lo) * i / 19.0);
    }
    const auto rows = lambda_sweep(0.2, 2, 0.1, 0.01, grid);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].calls_log10 > rows[i - 1].calls_log10 + 1e-9) {
        detail = "calls not monotone at lambda=" +
                 std::to_string(rows[i].lambda);
        return false;
      }
    }
    if (!(rows.back().ratio < 1e-2)) {
      detail = "ratio at the largest lambda is not below 1e-2";
      return false;
    }
    if (!(rows.front().ratio >= 0.5)) {
      detail = "ratio at the smallest lambda is below 0.5";
      return false;
    }
    return true;
  });

  // criteria 6 and 9 share the consistency runs; collect outputs once
  struct TableRun {
    std::string env;
    ConsistencyReport report;
    double c_gamma = 0.0;
  };
  std::vector<TableRun> table_runs;

  gate.criterion(6, "consistency bias bound", 600.0,
                 [&table_runs](std::string& detail) {
    PlannerConfig cfg;
    cfg.gamma = 0.2;
    cfg.delta_prime = 0.1;
    for (const char* name :
         {"chain:5", "chain:10", "gridworld:5", "gridworld:10"}) {
      const EnvSpec spec = EnvSpec::parse(name);
      const TabularMdp m = build_env(spec);
      const auto op = SmoothOperator::logsumexp_max(10.0, m.n_actions);
      const ConsistencyHarness h(m, op, cfg);
      const auto report = h.run(spec, 0, 0.35, 32723, 7, /*keep_outputs=*/true);
      table_runs.push_back({name, report, h.constants().c_gamma});
      if (std::abs(report.delta_hat) > 0.35) {
        detail = std::string(name) + ": |bias| above eps";
        return false;
      }
      if (std::abs(report.delta_hat) > 0.035) {
        detail = std::string(name) + ": |bias| above the eps/10 sanity level";
        return false;
      }
    }
    return true;
  });

  gate.criterion(7, "failure-parameter selection", 30.0,
                 [](std::string& detail) {
    // feasible (eps, delta) targets need one-level call counts: small gamma
    // and lambda keep delta' * calls below 1
    const BoundInputs shallow = BoundInputs::logsumexp(0.0036, 0.01, 2, 0.1);
    const std::pair<double, double> pairs[] = {
        {0.0625, 0.2}, {0.0625, 0.3}, {0.0625, 0.6},
        {0.07, 0.3},   {0.08, 0.6},   {0.1, 0.6}};
    for (const auto& [eps, delta] : pairs) {
      const double dp = choose_delta_prime(shallow, eps, delta);
      BoundInputs in = shallow;
      in.delta_prime = dp;
      if (static_cast<long double>(dp) *
              ComplexityModel(in).predict_calls(eps) >
          static_cast<long double>(delta)) {
        detail = "selected delta' is infeasible";
        return false;
      }
    }
    // product at delta' = eps^5 shrinks along halvings
    long double prev = std::numeric_limits<long double>::infinity();
    for (double eps : {0.5, 0.25, 0.125, 0.0625}) {
      BoundInputs in = shallow;
      in.delta_prime = std::pow(eps, 5.0);
      const long double product =
          static_cast<long double>(in.delta_prime) *
          ComplexityModel(in).predict_calls(eps);
      if (!(product < prev)) {
        detail = "product not decreasing at eps=" + std::to_string(eps);
        return false;
      }
      prev = product;
    }
    return true;
  });

  gate.criterion(8, "clipping contraction", 5.0, [](std::string& detail) {
    RngStream rng(31);
    for (int trial = 0; trial < 100'000; ++trial) {
      const std::size_t k = 1 + (rng.next_u64() % 6);
      const double c = rng.uniform(0.1, 20.0);
      QVector x(k), q(k);
      for (std::size_t i = 0; i < k; ++i) {
        q[i] = rng.uniform(0.0, c);
        x[i] = rng.uniform(-2.0 * c, 3.0 * c);
      }
      const QVector clipped = clip_q(x, c);
      double before = 0.0, after = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        before = std::max(before, std::abs(x[i] - q[i]));
        after = std::max(after, std::abs(clipped[i] - q[i]));
      }
      if (after > before) {
        detail = "clipping increased the sup-distance";
        return false;
      }
    }
    return true;
  });

  gate.criterion(9, "bounded consistency outputs", 30.0,
                 [&table_runs](std::string& detail) {
    if (table_runs.size() != 4) {
      detail = "consistency runs unavailable";
      return false;
    }
    for (const TableRun& run : table_runs) {
      const bool chain = run.env.rfind("chain", 0) == 0;
      if (chain && !almost(run.c_gamma, 37.179, 1e-3)) {
        detail = run.env + ": unexpected estimate bound";
        return false;
      }
      for (double out : run.report.outputs) {
        if (std::abs(out) > run.c_gamma) {
          detail = run.env + ": output outside the estimate bound";
          return false;
        }
      }
    }
    return true;
  });

  if (gate.failures > 0) {
    std::printf("%d criterion(s) failed\n", gate.failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}

// Command-line front end: exact solving, planning, sample-complexity curves,
// the lambda sweep, the consistency harness, and a quick selftest.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smoothcruiser/smoothcruiser.hpp"

namespace sc = smoothcruiser;
using nlohmann::json;

namespace {

// 12 significant digits, C locale, stable across platforms.
std::string fmt12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

void write_output(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) {
    throw sc::Error(sc::errc::invalid_argument,
                    "cannot open output file '" + out_path + "'");
  }
  f << text;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SMOOTHCRUISER_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw sc::Error(sc::errc::invalid_argument,
                      "SMOOTHCRUISER_SEED must be a nonnegative integer");
    }
  }
  return 0;
}

sc::SmoothOperator make_operator(const std::string& kind, double lambda,
                                 std::size_t k) {
  if (kind == "logsumexp") return sc::SmoothOperator::logsumexp_max(lambda, k);
  if (kind == "logsumexp-min") {
    return sc::SmoothOperator::logsumexp_min(lambda, k);
  }
  if (kind == "sqrt-reg") return sc::SmoothOperator::sqrt_reg(lambda, k);
  throw sc::Error(sc::errc::invalid_argument,
                  "unknown operator kind '" + kind + "'");
}

struct CommonFlags {
  double gamma = 0.9;
  double lambda = 1.0;
  double delta_prime = 0.1;
  std::uint64_t seed = default_seed();
  std::string out;
  std::string format = "json";
};

int cmd_solve(const std::string& env_text, const CommonFlags& c,
              const std::string& op_kind, double tol) {
  const sc::EnvSpec spec = sc::EnvSpec::parse(env_text);
  const sc::TabularMdp model = sc::build_env(spec);
  const sc::SmoothOperator op =
      make_operator(op_kind, c.lambda, model.n_actions);
  const sc::ValueTable table = sc::solve_regularized(model, op, c.gamma, tol);

  json j;
  j["env"] = spec.to_string();
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["operator"] = op_kind;
  j["v"] = table.v;
  j["q"] = table.q;
  j["residual"] = table.residual;
  j["iterations"] = table.iterations;
  write_output(c.out, j.dump(2) + "\n");
  return 0;
}

int cmd_plan(const std::string& env_text, const CommonFlags& c,
             std::size_t state, double epsilon, double n_scale, bool parallel) {
  const sc::EnvSpec spec = sc::EnvSpec::parse(env_text);
  const sc::TabularMdp model = sc::build_env(spec);
  const sc::SmoothOperator op =
      sc::SmoothOperator::logsumexp_max(c.lambda, model.n_actions);

  sc::PlannerConfig cfg;
  cfg.gamma = c.gamma;
  cfg.delta_prime = c.delta_prime;
  cfg.n_scale = n_scale;
  cfg.parallel = parallel;
  cfg.seed = c.seed;
  const sc::Planner planner(cfg, op);
  sc::GenerativeOracle oracle(model, c.seed);
  const sc::PlanResult result = planner.plan(oracle, state, epsilon);

  json j;
  j["env"] = spec.to_string();
  j["state"] = state;
  j["epsilon"] = epsilon;
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["delta_prime"] = c.delta_prime;
  j["n_scale"] = n_scale;
  j["seed"] = c.seed;
  j["estimate"] = result.estimate;
  j["oracle_calls"] = result.oracle_calls;
  j["predicted_calls"] = result.predicted_calls;
  j["max_recursion_depth_seen"] = result.max_recursion_depth_seen;
  write_output(c.out, j.dump(2) + "\n");
  return 0;
}

int cmd_complexity(const CommonFlags& c, std::size_t actions, int points) {
  const sc::BoundInputs in = sc::BoundInputs::logsumexp(
      c.gamma, c.lambda, actions, c.delta_prime);
  const sc::ComplexityModel model(in);
  const std::vector<double> grid = model.default_eps_grid(points);

  std::vector<sc::BoundCurveRow> rows;
  rows.reserve(grid.size());
  for (double eps : grid) rows.push_back(model.curve_row(eps));

  if (c.format == "csv") {
    std::ostringstream os;
    os << "epsilon,simulated,bound_lemma,bound_sparse,predicted_calls,"
          "simulated_log10,bound_lemma_log10,bound_sparse_log10,"
          "predicted_calls_log10\n";
    for (const auto& r : rows) {
      const double pred = static_cast<double>(r.predicted_calls);
      os << fmt12(r.epsilon) << ',' << fmt12(r.simulated) << ','
         << fmt12(r.bound_small_eps) << ',' << fmt12(r.bound_sparse) << ','
         << fmt12(pred) << ',' << fmt12(std::log10(r.simulated)) << ','
         << fmt12(std::log10(r.bound_small_eps)) << ','
         << fmt12(r.bound_sparse_log10) << ','
         << fmt12(static_cast<double>(std::log10(r.predicted_calls))) << "\n";
    }
    write_output(c.out, os.str());
  } else {
    json j = json::array();
    for (const auto& r : rows) {
      json row;
      row["epsilon"] = r.epsilon;
      row["simulated"] = r.simulated;
      row["bound_lemma"] = r.bound_small_eps;
      row["bound_sparse"] = r.bound_sparse;
      row["predicted_calls"] = static_cast<double>(r.predicted_calls);
      row["bound_sparse_log10"] = r.bound_sparse_log10;
      j.push_back(row);
    }
    write_output(c.out, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_lambda_sweep(const CommonFlags& c, std::size_t actions, double rel_err,
                     double lambda_min, double lambda_max, int points) {
  if (!(lambda_min > 0.0) || !(lambda_max > lambda_min)) {
    throw sc::Error(sc::errc::invalid_argument,
                    "need 0 < lambda-min < lambda-max");
  }
  if (points < 2) {
    throw sc::Error(sc::errc::invalid_argument, "need at least 2 grid points");
  }
  std::vector<double> grid(points);
  const double lo = std::log(lambda_min);
  const double hi = std::log(lambda_max);
  for (int i = 0; i < points; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * double(i) / double(points - 1));
  }
  const std::vector<sc::LambdaSweepRow> rows =
      sc::lambda_sweep(c.gamma, actions, c.delta_prime, rel_err, grid);

  if (c.format == "csv") {
    std::ostringstream os;
    os << "lambda,epsilon,calls,sparse_calls,ratio,calls_log10,"
          "sparse_calls_log10\n";
    for (const auto& r : rows) {
      os << fmt12(r.lambda) << ',' << fmt12(r.epsilon) << ','
         << fmt12(std::pow(10.0, r.calls_log10)) << ','
         << fmt12(std::pow(10.0, r.sparse_calls_log10)) << ','
         << fmt12(r.ratio) << ',' << fmt12(r.calls_log10) << ','
         << fmt12(r.sparse_calls_log10) << "\n";
    }
    write_output(c.out, os.str());
  } else {
    json j = json::array();
    for (const auto& r : rows) {
      json row;
      row["lambda"] = r.lambda;
      row["epsilon"] = r.epsilon;
      row["calls_log10"] = r.calls_log10;
      row["sparse_calls_log10"] = r.sparse_calls_log10;
      row["ratio"] = r.ratio;
      row["condition_ok"] = r.condition_ok;
      j.push_back(row);
    }
    write_output(c.out, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_consistency(const std::string& env_text, const CommonFlags& c,
                    std::size_t state, double epsilon, std::uint64_t n_sim,
                    const std::string& runs_out) {
  const sc::EnvSpec spec = sc::EnvSpec::parse(env_text);
  const sc::TabularMdp model = sc::build_env(spec);
  const sc::SmoothOperator op =
      sc::SmoothOperator::logsumexp_max(c.lambda, model.n_actions);
  sc::PlannerConfig cfg;
  cfg.gamma = c.gamma;
  cfg.delta_prime = c.delta_prime;
  cfg.seed = c.seed;
  const sc::ConsistencyHarness harness(model, op, cfg);
  const sc::ConsistencyReport report =
      harness.run(spec, state, epsilon, n_sim, c.seed, !runs_out.empty());

  if (!runs_out.empty()) {
    std::ostringstream os;
    os << "run_index,output\n";
    for (std::size_t i = 0; i < report.outputs.size(); ++i) {
      os << i << ',' << fmt12(report.outputs[i]) << "\n";
    }
    write_output(runs_out, os.str());
  }

  json j;
  j["env"] = spec.to_string();
  j["state"] = report.state;
  j["epsilon"] = report.epsilon;
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["n_sim"] = report.n_sim;
  j["seed"] = c.seed;
  j["delta_hat"] = report.delta_hat;
  j["std_dev"] = report.std_dev;
  j["exact_value"] = report.exact_value;
  j["c_gamma"] = report.c_gamma;
  j["oracle_calls"] = report.oracle_calls;
  j["epsilon_above_quarter_kappa"] = report.epsilon_above_quarter_kappa;
  write_output(c.out, j.dump(2) + "\n");
  return 0;
}

int cmd_selftest(bool inject_failure) {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
  };
  auto near = [](double a, double b, double tol) {
    return std::abs(a - b) <= tol;
  };

  const auto lse = sc::SmoothOperator::logsumexp_max(1.0, 2);
  check("logsumexp-ties-value", near(lse.value({0.0, 0.0}), std::log(2.0), 1e-12));
  {
    const sc::QVector g = lse.gradient({std::log(3.0), 0.0});
    check("logsumexp-gradient-softmax",
          near(g[0], 0.75, 1e-12) && near(g[1], 0.25, 1e-12));
  }
  {
    const auto mn = sc::SmoothOperator::logsumexp_min(1.0, 2);
    check("logsumexp-min-sign", near(mn.value({0.0, 0.0}), -std::log(2.0), 1e-12));
  }
  {
    const auto sq = sc::SmoothOperator::sqrt_reg(1.0, 2, 1.0);
    check("sqrt-reg-lagrange-symmetric",
          near(sq.solve_lagrange({0.0, 0.0}), std::sqrt(2.0) / 2.0, 1e-10));
    check("sqrt-reg-value-oracle",
          near(sq.value({1.0, 0.0}), 2.16509533839278, 1e-10));
  }
  {
    bool ok = true;
    sc::RngStream rng(11);
    for (int i = 0; i < 200 && ok; ++i) {
      sc::QVector a(2), b(2);
      double d2 = 0.0;
      for (int k = 0; k < 2; ++k) {
        a[k] = rng.uniform(0.0, 10.0);
        b[k] = rng.uniform(0.0, 10.0);
        d2 += (a[k] - b[k]) * (a[k] - b[k]);
      }
      const sc::QVector g = lse.gradient(b);
      double lin = lse.value(b);
      for (int k = 0; k < 2; ++k) lin += (a[k] - b[k]) * g[k];
      ok = std::abs(lse.value(a) - lin) <= 1.0 * d2 + 1e-9;
    }
    check("operator-smoothness-sample", ok);
  }
  {
    sc::TabularMdp one;
    one.n_states = 1;
    one.n_actions = 2;
    one.transition = {1.0, 1.0};
    one.reward_mean = {1.0, 1.0};
    const auto table = sc::solve_regularized(one, lse, 0.5, 1e-12);
    const double expected =
        (inject_failure ? 3.5 : (1.0 + std::log(2.0)) / 0.5);
    check("solver-single-state-closed-form",
          near(table.v[0], expected, 1e-10));
  }
  {
    const sc::TabularMdp chain = sc::build_env(sc::EnvSpec::parse("chain:5"));
    const auto op = sc::SmoothOperator::logsumexp_max(10.0, 2);
    const auto table = sc::solve_regularized(chain, op, 0.2, 1e-10);
    check("solver-residual-chain", table.residual <= 1e-10);
  }
  {
    sc::RngStream a(42), b(42);
    bool ok = true;
    for (int i = 0; i < 100; ++i) ok = ok && a.next_u64() == b.next_u64();
    sc::RngStream c1 = sc::RngStream(42).child(7);
    sc::RngStream c2 = sc::RngStream(42).child(7);
    ok = ok && c1.next_u64() == c2.next_u64();
    check("rng-split-determinism", ok);
  }
  {
    const sc::TabularMdp chain = sc::build_env(sc::EnvSpec::parse("chain:5"));
    sc::GenerativeOracle oracle(chain, 3);
    for (int i = 0; i < 25; ++i) oracle.call(0, 0);
    check("oracle-call-counter", oracle.call_count() == 25);
  }
  {
    const sc::TabularMdp chain = sc::build_env(sc::EnvSpec::parse("chain:5"));
    const auto op = sc::SmoothOperator::logsumexp_max(10.0, 2);
    sc::PlannerConfig cfg;
    cfg.gamma = 0.04;
    cfg.delta_prime = 0.5;
    std::uint64_t counts[2] = {0, 0};
    for (int i = 0; i < 2; ++i) {
      cfg.seed = 1000 + 77 * i;
      const sc::Planner planner(cfg, op);
      sc::GenerativeOracle oracle(chain, cfg.seed);
      counts[i] = planner.plan(oracle, 0, 2.0).oracle_calls;
    }
    check("planner-call-determinism", counts[0] == counts[1] && counts[0] > 0);
  }
  {
    const sc::QVector clipped = sc::clip_q({-1.0, 0.5, 99.0}, 2.0);
    check("clip-contraction", clipped[0] == 0.0 && clipped[1] == 0.5 &&
                                  clipped[2] == 2.0);
  }

  std::cout << (failures == 0 ? "selftest: all checks passed\n"
                              : "selftest: FAILURES\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SmoothCruiser planning toolkit"};
  app.require_subcommand(1);

  CommonFlags c;
  std::string env_text;
  std::string op_kind = "logsumexp";
  std::size_t state = 0;
  std::size_t actions = 2;
  double epsilon = 0.1;
  double tol = 1e-10;
  double n_scale = 1.0;
  double rel_err = 0.01;
  double lambda_min = 1e-3;
  double lambda_max = 100.0;
  int points = 40;
  int sweep_points = 20;
  std::uint64_t n_sim = 1000;
  bool parallel = false;
  bool inject_failure = false;
  std::string runs_out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--gamma", c.gamma, "discount factor in (0, 1)");
    sub->add_option("--lambda", c.lambda, "regularization temperature");
    sub->add_option("--delta-prime", c.delta_prime,
                    "per-call failure parameter in (0, 1)");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--out", c.out, "output file (default: stdout)");
    sub->add_option("--format", c.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  CLI::App* solve = app.add_subcommand("solve", "exact regularized values");
  solve->add_option("--env", env_text, "environment, family:<n>")->required();
  solve->add_option("--operator", op_kind,
                    "logsumexp, logsumexp-min or sqrt-reg");
  solve->add_option("--tol", tol, "Bellman residual tolerance");
  add_common(solve);

  CLI::App* plan = app.add_subcommand("plan", "run the planner once");
  plan->add_option("--env", env_text, "environment, family:<n>")->required();
  plan->add_option("--state", state, "start state index");
  plan->add_option("--epsilon", epsilon, "target accuracy")->required();
  plan->add_option("--n-scale", n_scale, "sample-count multiplier");
  plan->add_flag("--parallel", parallel, "parallel averaging loop");
  add_common(plan);

  CLI::App* complexity =
      app.add_subcommand("complexity", "bound-vs-simulation curve");
  complexity->add_option("--actions,-K", actions, "number of actions");
  complexity->add_option("--points", points, "grid size");
  add_common(complexity);

  CLI::App* sweep =
      app.add_subcommand("lambda-sweep", "calls vs regularization");
  sweep->add_option("--actions,-K", actions, "number of actions");
  sweep->add_option("--rel-err", rel_err, "relative accuracy in (0, 1)");
  sweep->add_option("--lambda-min", lambda_min, "sweep lower end");
  sweep->add_option("--lambda-max", lambda_max, "sweep upper end");
  sweep->add_option("--points", sweep_points, "grid size");
  add_common(sweep);

  CLI::App* consistency =
      app.add_subcommand("consistency", "noisy-oracle bias harness");
  consistency->add_option("--env", env_text, "environment, family:<n>")
      ->required();
  consistency->add_option("--state", state, "reference state index");
  consistency->add_option("--epsilon", epsilon, "target accuracy")->required();
  consistency->add_option("--n-sim", n_sim, "number of independent runs");
  consistency->add_option("--runs-out", runs_out,
                          "optional per-run CSV output path");
  add_common(consistency);

  CLI::App* selftest = app.add_subcommand("selftest", "quick named checks");
  selftest->add_flag("--inject-failure", inject_failure)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: invalid-argument: " << e.what() << "\n";
    return 2;
  }

  try {
    if (solve->parsed()) return cmd_solve(env_text, c, op_kind, tol);
    if (plan->parsed()) {
      return cmd_plan(env_text, c, state, epsilon, n_scale, parallel);
    }
    if (complexity->parsed()) {
      if (c.format == "json" &&
          !complexity->get_option("--format")->count()) {
        c.format = "csv";
      }
      return cmd_complexity(c, actions, points);
    }
    if (sweep->parsed()) {
      if (c.format == "json" && !sweep->get_option("--format")->count()) {
        c.format = "csv";
      }
      return cmd_lambda_sweep(c, actions, rel_err, lambda_min, lambda_max,
                              sweep_points);
    }
    if (consistency->parsed()) {
      return cmd_consistency(env_text, c, state, epsilon, n_sim, runs_out);
    }
    if (selftest->parsed()) return cmd_selftest(inject_failure);
    std::cerr << "error: invalid-argument: no subcommand given\n";
    return 2;
  } catch (const sc::Error& e) {
    std::cerr << "error: " << e.code_str() << ": " << e.what() << "\n";
    return e.is_validation_error() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal-logic: " << e.what() << "\n";
    return 1;
  }
}

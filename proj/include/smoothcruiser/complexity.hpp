#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "smoothcruiser/errors.hpp"
#include "smoothcruiser/planner.hpp"

namespace smoothcruiser {

// Parameters of the sample-complexity bounds. Defaults follow the
// log-sum-exp operator: L = 1/lambda, M = lambda log K.
struct BoundInputs {
  double gamma = 0.0;
  double lambda = 0.0;
  std::size_t num_actions = 0;
  double delta_prime = 0.0;
  double smoothness = 0.0;
  double m_lambda = 0.0;
  double n_scale = 1.0;

  static BoundInputs logsumexp(double gamma, double lambda,
                               std::size_t num_actions, double delta_prime,
                               double n_scale = 1.0) {
    if (!(lambda > 0.0)) {
      throw Error(errc::invalid_argument,
                  "regularization temperature must be positive");
    }
    BoundInputs in;
    in.gamma = gamma;
    in.lambda = lambda;
    in.num_actions = num_actions;
    in.delta_prime = delta_prime;
    in.smoothness = 1.0 / lambda;
    in.m_lambda = lambda * std::log(double(num_actions));
    in.n_scale = n_scale;
    return in;
  }

  DerivedConstants derived() const {
    PlannerConfig cfg;
    cfg.gamma = gamma;
    cfg.delta_prime = delta_prime;
    cfg.n_scale = n_scale;
    return DerivedConstants::make(cfg, num_actions, smoothness, m_lambda);
  }
};

// Constants of the closed-form sample-complexity envelope
// (c1/eps^4) log(c2/d') [c3 log(c4/eps)]^(log2(c5 log(c2/d'))).
struct ThmConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
};

struct BoundCurveRow {
  double epsilon = 0.0;
  double simulated = 0.0;         // recursion-count simulation
  double bound_small_eps = 0.0;   // small-eps bound (NaN above kappa)
  double bound_sparse_log10 = 0.0;
  double bound_sparse = 0.0;      // +inf when it overflows a double
  long double predicted_calls = 0.0L;
};

struct LambdaSweepRow {
  double lambda = 0.0;
  double epsilon = 0.0;
  double calls_log10 = 0.0;        // K N(eps) * simulated recursion count
  double sparse_calls_log10 = 0.0; // K N(eps) * sparse-strategy count
  double ratio = 0.0;              // calls / sparse_calls
  bool condition_ok = true;        // eta2 >= 0 held for this lambda
};

// Evaluates the recursion-count simulation and the theoretical bounds for a
// fixed configuration. Pure and memoized; safe to share const.
class ComplexityModel {
 public:
  explicit ComplexityModel(const BoundInputs& in)
      : in_(in), d_(in.derived()) {
    const double k = double(in_.num_actions);
    const double logterm = std::log(2.0 * k / in_.delta_prime);
    alpha_ = 18.0 * (1.0 + d_.m_lambda) * (1.0 + d_.m_lambda) * k /
             (std::pow(1.0 - d_.gamma, 4.0) *
              std::pow(1.0 - std::sqrt(d_.gamma), 2.0)) *
             logterm;
    beta_ = d_.beta();
    eta2_ = std::log2(d_.gamma / (1.0 - d_.gamma) * 2.0 * beta_ / d_.kappa);
  }

  const BoundInputs& inputs() const { return in_; }
  const DerivedConstants& derived() const { return d_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double eta2() const { return eta2_; }
  // eta1 = kappa^2 * n_sampleV(kappa): the bound's base case identifies
  // n_sampleV(kappa) with the closed-form count at eps = kappa.
  double eta1() const { return d_.kappa * d_.kappa * closed_form(d_.kappa); }

  // Recursion-count simulation: below kappa the exact recurrence
  // 1 + n(eps/sqrt(g)) + K N(sqrt(kappa eps)) n(sqrt(kappa eps / g));
  // at or above kappa the closed form g^(h(h-1)/2) (2 alpha / eps^2)^h with
  // the real-valued depth h (see depth_real).
  double sim_recurrence(double eps) const {
    check_eps(eps);
    if (eps >= d_.kappa) return closed_form(eps);
    require_condition();
    const auto key = detail::log_eps_key(eps);
    if (auto it = sim_cache_.find(key); it != sim_cache_.end()) {
      return it->second;
    }
    const double n = static_cast<double>(
        n_of_eps(d_, std::sqrt(d_.kappa * eps)));
    const double value =
        1.0 + sim_recurrence(eps / std::sqrt(d_.gamma)) +
        double(d_.num_actions) * n *
            sim_recurrence(std::sqrt(d_.kappa * eps / d_.gamma));
    sim_cache_.emplace(key, value);
    return value;
  }

  // Small-eps recursion bound B(eps) = eta1 [log_{1/g}(kappa/(g eps))]^eta2 / eps^2,
  // valid for 0 < eps <= kappa.
  double bound_small_eps(double eps) const {
    check_eps(eps);
    if (eps > d_.kappa * (1.0 + 1e-12)) {
      throw Error(errc::invalid_argument,
                  "the small-eps bound is defined for eps <= kappa");
    }
    require_condition();
    const double logterm =
        std::log(d_.kappa / (d_.gamma * eps)) / std::log(1.0 / d_.gamma);
    return eta1() * std::pow(logterm, eta2_) / (eps * eps);
  }

  // Real-valued recursion depth: 2 log_gamma(eps (1-gamma)/(1+M)), floored at
  // 0. The bounds use the real exponent instead of its integer ceiling: the
  // integer-depth closed form jumps by a factor of about 2 alpha gamma^h /
  // eps^2 at each depth increment, and those jumps propagate through the
  // recurrence and break the dominance of the small-eps bound numerically.
  double depth_real(double eps) const {
    if (eps >= d_.v_max) return 0.0;
    const double ratio = eps * (1.0 - d_.gamma) / (1.0 + d_.m_lambda);
    return std::max(0.0, 2.0 * std::log(ratio) / std::log(d_.gamma));
  }

  // Natural log of the sparse-sampling comparator
  // g^(h(h-1)/2) (2 alpha / eps^2)^h, extrapolated to all eps.
  double bound_sparse_log(double eps) const {
    check_eps(eps);
    const double h = depth_real(eps);
    return 0.5 * h * (h - 1.0) * std::log(d_.gamma) +
           h * (std::log(2.0 * alpha_) - 2.0 * std::log(eps));
  }

  double bound_sparse(double eps) const {
    return std::exp(bound_sparse_log(eps));
  }

  // Oracle calls of a full planner run (same branch walk as the planner).
  long double predict_calls(double eps) const {
    return predicted_oracle_calls_approx(d_, eps);
  }

  ThmConstants theorem_constants() const {
    ThmConstants c;
    const double k = double(in_.num_actions);
    const double l = d_.smoothness;
    const double m1 = 1.0 + d_.m_lambda;
    c.c1 = 18.0 * m1 * m1 * closed_form(d_.kappa) /
           (k * k * l * l * std::pow(1.0 - d_.gamma, 4.0));
    c.c2 = 2.0 * k;
    c.c3 = 1.0 / std::log(1.0 / d_.gamma);
    c.c4 = (1.0 - std::sqrt(d_.gamma)) / (d_.gamma * k * l);
    c.c5 = 36.0 * m1 * m1 * d_.gamma * k * k * k * l * l /
           (std::pow(1.0 - d_.gamma, 5.0) *
            std::pow(1.0 - std::sqrt(d_.gamma), 4.0));
    return c;
  }

  // Natural log of the closed-form envelope of the total sample complexity.
  double theorem_envelope_log(double eps) const {
    check_eps(eps);
    const ThmConstants c = theorem_constants();
    const double logdelta = std::log(c.c2 / in_.delta_prime);
    return std::log(c.c1) - 4.0 * std::log(eps) + std::log(logdelta) +
           std::log2(c.c5 * logdelta) *
               std::log(c.c3 * std::log(c.c4 / eps));
  }

  // Log-spaced eps grid from 10*kappa down to kappa/1000.
  std::vector<double> default_eps_grid(int points = 40) const {
    std::vector<double> grid(points);
    const double hi = std::log(10.0 * d_.kappa);
    const double lo = std::log(d_.kappa / 1000.0);
    for (int i = 0; i < points; ++i) {
      grid[i] = std::exp(hi + (lo - hi) * double(i) / double(points - 1));
    }
    return grid;
  }

  BoundCurveRow curve_row(double eps) const {
    BoundCurveRow row;
    row.epsilon = eps;
    row.simulated = sim_recurrence(eps);
    row.bound_small_eps = eps <= d_.kappa * (1.0 + 1e-12)
                              ? bound_small_eps(std::min(eps, d_.kappa))
                              : std::numeric_limits<double>::quiet_NaN();
    row.bound_sparse_log10 = bound_sparse_log(eps) / std::log(10.0);
    row.bound_sparse = bound_sparse(eps);
    row.predicted_calls = predict_calls(eps);
    return row;
  }

 private:
  static void check_eps(double eps) {
    if (!(eps > 0.0)) {
      throw Error(errc::invalid_argument, "accuracy must be positive");
    }
  }

  void require_condition() const {
    if (eta2_ < 0.0) {
      throw Error(errc::invalid_configuration,
                  "the small-eps recursion bound requires "
                  "log2(gamma/(1-gamma) * 2 beta(delta')/kappa) >= 0; "
                  "decrease delta-prime");
    }
  }

  double closed_form(double eps) const { return std::exp(bound_sparse_log(eps)); }

  BoundInputs in_;
  DerivedConstants d_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  double eta2_ = 0.0;
  mutable std::map<long long, double> sim_cache_;
};

// Largest delta' on the geometric grid {1, 1/2, 1/4, ...} (floored at eps^5)
// with delta' * predict_calls(eps, delta') <= delta.
inline double choose_delta_prime(const BoundInputs& base, double eps,
                                 double delta) {
  if (!(eps > 0.0) || !(eps < 1.0) || !(delta > 0.0) || !(delta < 1.0)) {
    throw Error(errc::invalid_argument,
                "accuracy and failure probability must lie in (0, 1)");
  }
  const double floor_dp = std::pow(eps, 5.0);
  auto feasible = [&](double dp) {
    BoundInputs in = base;
    in.delta_prime = dp;
    return static_cast<long double>(dp) *
               ComplexityModel(in).predict_calls(eps) <=
           static_cast<long double>(delta);
  };
  for (double dp = 1.0; dp >= floor_dp; dp *= 0.5) {
    if (dp < 1.0 && feasible(dp)) return dp;
  }
  if (feasible(floor_dp)) return floor_dp;
  BoundInputs in = base;
  in.delta_prime = floor_dp;
  const long double lhs = static_cast<long double>(floor_dp) *
                          ComplexityModel(in).predict_calls(eps);
  throw Error(errc::infeasible_accuracy,
              "no delta' satisfies delta' * n(eps, delta') <= delta: at the "
              "eps^5 floor the product is " + std::to_string(double(lhs)) +
              " against delta = " + std::to_string(delta));
}

// Sweep of total calls vs. regularization at fixed relative accuracy:
// eps = rel_err * (1 + lambda log K)/(1 - gamma) per lambda.
inline std::vector<LambdaSweepRow> lambda_sweep(
    double gamma, std::size_t num_actions, double delta_prime, double rel_err,
    const std::vector<double>& lambda_grid) {
  if (!(rel_err > 0.0) || !(rel_err < 1.0)) {
    throw Error(errc::invalid_argument, "relative error must lie in (0, 1)");
  }
  std::vector<LambdaSweepRow> rows;
  rows.reserve(lambda_grid.size());
  for (double lambda : lambda_grid) {
    LambdaSweepRow row;
    row.lambda = lambda;
    const BoundInputs in =
        BoundInputs::logsumexp(gamma, lambda, num_actions, delta_prime);
    const ComplexityModel model(in);
    row.epsilon = rel_err * model.derived().v_max;
    try {
      const double scale_log10 =
          std::log10(double(num_actions) *
                     double(n_of_eps(model.derived(), row.epsilon)));
      const double sim_log10 = std::log10(model.sim_recurrence(row.epsilon));
      const double sparse_log10 =
          model.bound_sparse_log(row.epsilon) / std::log(10.0);
      row.calls_log10 = scale_log10 + sim_log10;
      row.sparse_calls_log10 = scale_log10 + sparse_log10;
      row.ratio = std::pow(10.0, sim_log10 - sparse_log10);
      row.condition_ok = true;
    } catch (const Error& e) {
      if (e.code() != errc::invalid_configuration) throw;
      row.condition_ok = false;
      row.calls_log10 = std::numeric_limits<double>::quiet_NaN();
      row.sparse_calls_log10 = std::numeric_limits<double>::quiet_NaN();
      row.ratio = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace smoothcruiser

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "smoothcruiser/environments.hpp"
#include "smoothcruiser/errors.hpp"
#include "smoothcruiser/operators.hpp"
#include "smoothcruiser/rng.hpp"

namespace smoothcruiser {

struct PlannerConfig {
  double gamma = 0.9;          // discount, in (0, 1)
  double delta_prime = 0.1;    // per-call failure parameter, in (0, 1)
  double n_scale = 1.0;        // multiplier on the per-action sample count
  int max_depth_slack = 2;     // slack on the recursion-depth guard
  bool parallel = false;       // run the averaging loop on multiple threads
  std::uint64_t seed = 0;
  // The depth-guard condition eta2 >= 0 required by the sample-complexity
  // bound can fail for large delta_prime; set this to plan anyway.
  bool allow_eta2_violation = false;
};

// Constants derived from (gamma, operator, delta_prime). kappa separates the
// uniform-sampling regime from the linearization regime; v_max bounds the
// value function; c_gamma bounds every recursive estimate.
struct DerivedConstants {
  double gamma = 0.0;
  double delta_prime = 0.0;
  double n_scale = 1.0;
  std::size_t num_actions = 0;
  double smoothness = 0.0;  // L
  double m_lambda = 0.0;    // |F(0)| bound
  double kappa = 0.0;       // (1 - sqrt(gamma)) / (K L)
  double v_max = 0.0;       // (1 + m_lambda) / (1 - gamma)
  double c_gamma = 0.0;     // 3 (1 + m_lambda) / (1 - gamma)^2

  static DerivedConstants make(const PlannerConfig& cfg,
                               const SmoothOperator& op) {
    return make(cfg, op.num_actions(), op.smoothness(),
                op.zero_offset_bound());
  }

  static DerivedConstants make(const PlannerConfig& cfg,
                               std::size_t num_actions, double smoothness,
                               double m_lambda) {
    if (!(cfg.gamma > 0.0) || !(cfg.gamma < 1.0)) {
      throw Error(errc::invalid_argument, "discount must lie in (0, 1)");
    }
    if (!(cfg.delta_prime > 0.0) || !(cfg.delta_prime < 1.0)) {
      throw Error(errc::invalid_argument, "delta-prime must lie in (0, 1)");
    }
    if (!(cfg.n_scale > 0.0)) {
      throw Error(errc::invalid_argument, "n-scale must be positive");
    }
    if (cfg.max_depth_slack < 0) {
      throw Error(errc::invalid_argument, "depth slack must be >= 0");
    }
    DerivedConstants d;
    d.gamma = cfg.gamma;
    d.delta_prime = cfg.delta_prime;
    d.n_scale = cfg.n_scale;
    d.num_actions = num_actions;
    d.smoothness = smoothness;
    d.m_lambda = m_lambda;
    d.kappa = smoothness > 0.0
                  ? (1.0 - std::sqrt(cfg.gamma)) /
                        (double(num_actions) * smoothness)
                  : std::numeric_limits<double>::infinity();
    d.v_max = (1.0 + m_lambda) / (1.0 - cfg.gamma);
    d.c_gamma = 3.0 * (1.0 + m_lambda) /
                ((1.0 - cfg.gamma) * (1.0 - cfg.gamma));
    return d;
  }

  // beta(delta') of the small-epsilon recursion bound; the bound needs
  // log2(gamma/(1-gamma) * 2 beta / kappa) >= 0.
  double beta() const {
    const double k = double(num_actions);
    return 18.0 * (1.0 + m_lambda) * (1.0 + m_lambda) * k * k * smoothness /
           (std::pow(1.0 - gamma, 4.0) *
            std::pow(1.0 - std::sqrt(gamma), 3.0)) *
           std::log(2.0 * k / delta_prime);
  }

  bool eta2_condition_holds() const {
    if (!(smoothness > 0.0)) return true;  // kappa infinite, regime unused
    const double threshold = (1.0 - gamma) * (1.0 - std::sqrt(gamma)) /
                             (2.0 * gamma * double(num_actions) * smoothness);
    return beta() >= threshold;
  }
};

// Per-action sample count N(eps) of the averaging step, scaled by n_scale and
// floored at 1.
inline std::uint64_t n_of_eps(const DerivedConstants& d, double eps) {
  if (!(eps > 0.0)) {
    throw Error(errc::invalid_argument, "accuracy must be positive");
  }
  const double raw =
      18.0 * (1.0 + d.m_lambda) * (1.0 + d.m_lambda) /
      (std::pow(1.0 - d.gamma, 4.0) *
       std::pow(1.0 - std::sqrt(d.gamma), 2.0)) *
      std::log(2.0 * double(d.num_actions) / d.delta_prime) / (eps * eps);
  const double scaled = std::ceil(d.n_scale * raw);
  if (!(scaled < 9.0e18)) {
    throw Error(errc::numeric_failure,
                "per-action sample count overflows a 64-bit counter");
  }
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(scaled));
}

// Accuracy requested from the averaging step inside a value sample: eps in
// the uniform regime, sqrt(kappa * eps) in the linearization regime, and an
// infinite sentinel once eps clears v_max.
inline double zeta(const DerivedConstants& d, double eps) {
  if (!(eps > 0.0)) {
    throw Error(errc::invalid_argument, "accuracy must be positive");
  }
  if (eps >= d.v_max) return std::numeric_limits<double>::infinity();
  if (eps >= d.kappa) return eps;
  return std::sqrt(d.kappa * eps);
}

// Componentwise clamp to [0, c]. Never increases the sup-distance to any
// target vector already inside [0, c]^K.
inline QVector clip_q(QVector q, double c) {
  if (!(c > 0.0)) {
    throw Error(errc::invalid_argument, "clip bound must be positive");
  }
  for (double& x : q) x = std::clamp(x, 0.0, c);
  return q;
}

// Recursion-depth bound H(eps) = ceil(2 log_gamma(eps (1-gamma)/(1+M))),
// floored at 0.
inline int predict_depth(const DerivedConstants& d, double eps) {
  if (!(eps > 0.0)) {
    throw Error(errc::invalid_argument, "accuracy must be positive");
  }
  if (eps >= d.v_max) return 0;
  const double ratio = eps * (1.0 - d.gamma) / (1.0 + d.m_lambda);
  const double h = 2.0 * std::log(ratio) / std::log(d.gamma);
  return std::max(0, static_cast<int>(std::ceil(h - 1e-12)));
}

struct PlanResult {
  double estimate = 0.0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t predicted_calls = 0;
  int max_recursion_depth_seen = 0;
};

namespace detail {

inline long long log_eps_key(double eps) {
  return static_cast<long long>(std::llround(std::log(eps) * 1e12));
}

// Symbolic walk of the planner's branch logic, counting oracle calls without
// sampling. Memoized on eps (1e-12 tolerance in log-eps: the branch arguments
// generate dense irrational cascades otherwise).
class CallCounter {
 public:
  explicit CallCounter(const DerivedConstants& d) : d_(d) {}

  // Oracle calls made by one value sample at accuracy eps.
  long double sample_v_calls(double eps) const {
    if (eps >= d_.v_max) return 0.0L;
    const auto key = log_eps_key(eps);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    long double calls;
    if (eps >= d_.kappa) {
      calls = estimate_q_calls(eps);
    } else {
      calls = estimate_q_calls(std::sqrt(d_.kappa * eps)) + 1.0L +
              sample_v_calls(eps / std::sqrt(d_.gamma));
    }
    cache_.emplace(key, calls);
    return calls;
  }

  // Oracle calls made by the averaging step at accuracy eps: K * N(eps)
  // inner samples, each one oracle call plus a recursive value sample.
  long double estimate_q_calls(double eps) const {
    const long double n = static_cast<long double>(n_of_eps(d_, eps));
    return static_cast<long double>(d_.num_actions) * n *
           (1.0L + sample_v_calls(eps / std::sqrt(d_.gamma)));
  }

 private:
  DerivedConstants d_;
  mutable std::map<long long, long double> cache_;
};

}  // namespace detail

// Exact number of oracle calls a full planning run at accuracy eps will make.
// The count is a function of the configuration only, never of the random
// outcomes, so it matches the observed counter exactly.
inline long double predicted_oracle_calls_approx(const DerivedConstants& d,
                                                 double eps) {
  if (!(eps > 0.0)) {
    throw Error(errc::invalid_argument, "accuracy must be positive");
  }
  return detail::CallCounter(d).estimate_q_calls(eps);
}

// Oracle calls made by a single value sample at accuracy eps (the full
// planning run makes K * N(eps) of these plus one oracle call each).
inline long double predicted_sample_calls_approx(const DerivedConstants& d,
                                                 double eps) {
  if (!(eps > 0.0)) {
    throw Error(errc::invalid_argument, "accuracy must be positive");
  }
  return detail::CallCounter(d).sample_v_calls(eps);
}

inline std::uint64_t predicted_oracle_calls(const DerivedConstants& d,
                                            double eps) {
  const long double calls = predicted_oracle_calls_approx(d, eps);
  if (calls >= 9.2e18L) {
    throw Error(errc::numeric_failure,
                "predicted call count overflows a 64-bit counter");
  }
  return static_cast<std::uint64_t>(calls);
}

// Recursive low-bias value estimation from a generative model, exploiting the
// smoothness of the Bellman operator: above kappa, plain recursive averaging;
// below kappa, a first-order expansion of the operator around an estimated Q
// vector, with one sampled action correcting the linear term.
class Planner {
 public:
  Planner(const PlannerConfig& cfg, const SmoothOperator& op)
      : cfg_(cfg), op_(op), d_(DerivedConstants::make(cfg, op)) {
    if (!d_.eta2_condition_holds() && !cfg.allow_eta2_violation) {
      throw Error(errc::invalid_configuration,
                  "delta-prime too large: the depth-recursion bound requires "
                  "beta(delta') >= (1-gamma)(1-sqrt(gamma))/(2 gamma K L); "
                  "decrease delta-prime or set allow_eta2_violation");
    }
  }

  const DerivedConstants& constants() const { return d_; }
  const PlannerConfig& config() const { return cfg_; }
  const SmoothOperator& op() const { return op_; }

  // Full planning run: estimate = F(estimateQ(s, eps)).
  PlanResult plan(GenerativeOracle& oracle, std::size_t s, double eps) const {
    check_eps(eps);
    const std::uint64_t before = oracle.call_count();
    Stats stats;
    RngStream root(cfg_.seed);
    const QVector qhat = estimate_q_impl(oracle, s, eps, root,
                                         depth_budget(eps), stats);
    PlanResult result;
    result.estimate = op_.value(qhat);
    result.oracle_calls = oracle.call_count() - before;
    result.predicted_calls = predicted_oracle_calls(d_, eps);
    result.max_recursion_depth_seen =
        stats.max_depth.load(std::memory_order_relaxed);
    return result;
  }

  // One low-bias value sample at state s.
  double sample_v(GenerativeOracle& oracle, std::size_t s, double eps) const {
    check_eps(eps);
    Stats stats;
    RngStream root(cfg_.seed);
    return sample_v_impl(oracle, s, eps, root, depth_budget(eps), 0, stats);
  }

  // Averaged and clipped per-action value estimates at state s.
  QVector estimate_q(GenerativeOracle& oracle, std::size_t s,
                     double eps) const {
    check_eps(eps);
    Stats stats;
    RngStream root(cfg_.seed);
    return estimate_q_impl(oracle, s, eps, root, depth_budget(eps), stats);
  }

 private:
  struct Stats {
    std::atomic<int> max_depth{0};

    void record(int depth) {
      int cur = max_depth.load(std::memory_order_relaxed);
      while (depth > cur &&
             !max_depth.compare_exchange_weak(cur, depth,
                                              std::memory_order_relaxed)) {
      }
    }
  };

  static void check_eps(double eps) {
    if (!(eps > 0.0)) {
      throw Error(errc::invalid_argument, "accuracy must be positive");
    }
  }

  int depth_budget(double eps) const {
    return predict_depth(d_, eps) + cfg_.max_depth_slack;
  }

  double sample_v_impl(GenerativeOracle& oracle, std::size_t s, double eps,
                       RngStream& rng, int depth_left, int depth,
                       Stats& stats) const {
    stats.record(depth);
    if (depth_left < 0) {
      // eps grows strictly along every recursion path, so exceeding the
      // predicted depth indicates a bug.
      throw Error(errc::internal_logic,
                  "recursion exceeded the predicted depth bound");
    }
    if (eps >= d_.v_max) return 0.0;
    if (eps >= d_.kappa) {
      const QVector qhat =
          estimate_q_impl(oracle, s, eps, rng, depth_left, stats, depth);
      return op_.value(qhat);
    }
    // Linearization regime: estimate Q at the relaxed accuracy, expand F to
    // first order, and correct the linear term with one sampled action.
    const QVector qhat = estimate_q_impl(oracle, s, std::sqrt(d_.kappa * eps),
                                         rng, depth_left, stats, depth);
    const QVector grad = op_.gradient(qhat);
    double weight = 0.0;
    double dot = 0.0;
    for (std::size_t a = 0; a < grad.size(); ++a) {
      weight += grad[a];
      dot += qhat[a] * grad[a];
    }
    if (!(weight > 0.0)) {
      throw Error(errc::internal_logic,
                  "operator gradient has zero l1-norm");
    }
    const std::size_t action = rng.categorical(grad, weight);
    const auto [reward, next] = oracle.call(s, action, rng);
    const double vhat =
        sample_v_impl(oracle, next, eps / std::sqrt(d_.gamma), rng,
                      depth_left - 1, depth + 1, stats);
    return op_.value(qhat) - dot + (reward + d_.gamma * vhat) * weight;
  }

  QVector estimate_q_impl(GenerativeOracle& oracle, std::size_t s, double eps,
                          RngStream& rng, int depth_left, Stats& stats,
                          int depth = 0) const {
    const std::uint64_t n = n_of_eps(d_, eps);
    const double rec_eps = eps / std::sqrt(d_.gamma);
    QVector qhat(d_.num_actions, 0.0);
    std::vector<double> samples(n);

    for (std::size_t a = 0; a < d_.num_actions; ++a) {
      // Each inner sample owns a derived substream, so the estimate is
      // bit-identical whether the loop runs serially or in parallel.
      auto run_range = [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t i = lo; i < hi; ++i) {
          RngStream si =
              rng.child((static_cast<std::uint64_t>(a) << 44) ^ i);
          const auto [reward, next] = oracle.call(s, a, si);
          const double vhat = sample_v_impl(oracle, next, rec_eps, si,
                                            depth_left - 1, depth + 1, stats);
          samples[i] = reward + d_.gamma * vhat;
        }
      };

      if (cfg_.parallel && n >= 256) {
        const unsigned workers =
            std::max(2u, std::thread::hardware_concurrency());
        std::vector<std::thread> pool;
        std::mutex err_mutex;
        std::exception_ptr err;
        const std::uint64_t chunk = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
          const std::uint64_t lo = std::min<std::uint64_t>(n, w * chunk);
          const std::uint64_t hi = std::min<std::uint64_t>(n, lo + chunk);
          if (lo < hi) {
            pool.emplace_back([&, lo, hi] {
              try {
                run_range(lo, hi);
              } catch (...) {
                const std::scoped_lock lock(err_mutex);
                if (!err) err = std::current_exception();
              }
            });
          }
        }
        for (auto& t : pool) t.join();
        if (err) std::rethrow_exception(err);
      } else {
        run_range(0, n);
      }

      double sum = 0.0;  // fixed index order, for reproducibility
      for (std::uint64_t i = 0; i < n; ++i) sum += samples[i];
      qhat[a] = sum / static_cast<double>(n);
    }
    return clip_q(std::move(qhat), d_.v_max);
  }

  PlannerConfig cfg_;
  SmoothOperator op_;
  DerivedConstants d_;
};

}  // namespace smoothcruiser

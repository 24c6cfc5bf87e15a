#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "smoothcruiser/errors.hpp"
#include "smoothcruiser/rng.hpp"

namespace smoothcruiser {

// Action-value vector at a single state.
using QVector = std::vector<double>;

enum class OperatorKind { logsumexp_max, logsumexp_min, sqrt_reg };

namespace detail {

inline void check_finite(const QVector& q) {
  if (q.empty()) {
    throw Error(errc::invalid_argument, "action-value vector must be non-empty");
  }
  for (double x : q) {
    if (!std::isfinite(x)) {
      throw Error(errc::invalid_argument,
                  "action-value vector has a non-finite entry");
    }
  }
}

// lambda * log sum exp(q_i / lambda) with max subtraction, so the exponent
// arguments are <= 0 and no overflow occurs.
inline double logsumexp_value(const QVector& q, double lambda) {
  const double m = *std::max_element(q.begin(), q.end());
  double sum = 0.0;
  for (double x : q) sum += std::exp((x - m) / lambda);
  return m + lambda * std::log(sum);
}

inline QVector softmax(const QVector& q, double lambda) {
  const double m = *std::max_element(q.begin(), q.end());
  QVector w(q.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    w[i] = std::exp((q[i] - m) / lambda);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace detail

// Smooth Bellman operator over action values: log-sum-exp softening of max or
// min (temperature lambda, smoothness 1/lambda), or the sqrt-of-policy
// regularized max solved through its Lagrange condition.
class SmoothOperator {
 public:
  static SmoothOperator logsumexp_max(double lambda, std::size_t num_actions) {
    check_params(lambda, num_actions);
    return SmoothOperator(OperatorKind::logsumexp_max, lambda, num_actions,
                          1.0 / lambda, lambda * std::log(double(num_actions)));
  }

  static SmoothOperator logsumexp_min(double lambda, std::size_t num_actions) {
    check_params(lambda, num_actions);
    return SmoothOperator(OperatorKind::logsumexp_min, lambda, num_actions,
                          1.0 / lambda, lambda * std::log(double(num_actions)));
  }

  // The smoothness constant of the sqrt-regularized operator has no closed
  // form; by default it is estimated numerically on a sampled grid (times a
  // safety factor of 2). Pass smoothness_override to supply a known value.
  static SmoothOperator sqrt_reg(double lambda, std::size_t num_actions,
                                 std::optional<double> smoothness_override = {}) {
    check_params(lambda, num_actions);
    SmoothOperator op(OperatorKind::sqrt_reg, lambda, num_actions,
                      0.0, lambda * std::sqrt(double(num_actions)));
    op.smoothness_ = smoothness_override ? *smoothness_override
                                         : op.estimate_smoothness();
    if (!(op.smoothness_ >= 0.0)) {
      throw Error(errc::invalid_argument,
                  "smoothness constant must be nonnegative");
    }
    return op;
  }

  OperatorKind kind() const noexcept { return kind_; }
  double temperature() const noexcept { return lambda_; }
  std::size_t num_actions() const noexcept { return num_actions_; }

  // L such that |F(x) - F(x0) - (x-x0)'grad F(x0)| <= L ||x-x0||_2^2.
  double smoothness() const noexcept { return smoothness_; }

  // M = |F(0)|: lambda*log K for the log-sum-exp kinds, lambda*sqrt(K) for
  // the sqrt-regularized kind.
  double zero_offset_bound() const noexcept { return zero_offset_; }

  double value(const QVector& q) const {
    check_input(q);
    switch (kind_) {
      case OperatorKind::logsumexp_max:
        return detail::logsumexp_value(q, lambda_);
      case OperatorKind::logsumexp_min: {
        QVector neg(q.size());
        std::transform(q.begin(), q.end(), neg.begin(),
                       [](double x) { return -x; });
        return -detail::logsumexp_value(neg, lambda_);
      }
      case OperatorKind::sqrt_reg: {
        const double u = solve_lagrange(q);
        double v = 0.0;
        for (double x : q) {
          const double p = policy_weight(u, x);
          v += x * p + lambda_ * std::sqrt(p);
        }
        return v;
      }
    }
    throw Error(errc::internal_logic, "unknown operator kind");
  }

  // Componentwise nonnegative; l1-norm is exactly 1 for the log-sum-exp kinds
  // and for sqrt_reg (the Lagrange constraint is sum of weights = 1).
  QVector gradient(const QVector& q) const {
    check_input(q);
    switch (kind_) {
      case OperatorKind::logsumexp_max:
        return detail::softmax(q, lambda_);
      case OperatorKind::logsumexp_min: {
        QVector neg(q.size());
        std::transform(q.begin(), q.end(), neg.begin(),
                       [](double x) { return -x; });
        return detail::softmax(neg, lambda_);
      }
      case OperatorKind::sqrt_reg: {
        const double u = solve_lagrange(q);
        QVector w(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
          w[i] = policy_weight(u, q[i]);
        }
        return w;
      }
    }
    throw Error(errc::internal_logic, "unknown operator kind");
  }

  // Lagrange multiplier U of the sqrt-regularized problem: the root of
  // sum_a (lambda/2/(U - q_a))^2 = 1 on [max(q)+lambda/2, max(q)+lambda*sqrt(K)/2].
  // The residual is strictly decreasing in U on that bracket, so bisection
  // converges unconditionally.
  double solve_lagrange(const QVector& q) const {
    if (kind_ != OperatorKind::sqrt_reg) {
      throw Error(errc::unsupported_operation,
                  "solve_lagrange is defined for the sqrt_reg kind only");
    }
    check_input(q);
    const double m = *std::max_element(q.begin(), q.end());
    const std::size_t k = q.size();
    double lo = m + lambda_ / 2.0;
    double hi = m + lambda_ * std::sqrt(double(k)) / 2.0;
    if (k == 1) return lo;  // single term: (lambda/2/(U-q))^2 = 1 exactly
    auto residual = [&](double u) {
      double s = 0.0;
      for (double x : q) {
        const double t = lambda_ / 2.0 / (u - x);
        s += t * t;
      }
      return s - 1.0;
    };
    // residual(lo) >= 0 (the max term alone contributes 1),
    // residual(hi) <= 0 (every term is at most 1/K).
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (residual(mid) >= 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
    }
    const double u = 0.5 * (lo + hi);
    if (std::abs(residual(u)) > 1e-10) {
      throw Error(errc::numeric_failure,
                  "Lagrange root finder did not reach the residual tolerance");
    }
    return u;
  }

  // F(q) - max(q) for the max kind, min(q) - F(q) for the min kind; lies in
  // [0, lambda*log K].
  double max_approx_gap(const QVector& q) const {
    check_input(q);
    switch (kind_) {
      case OperatorKind::logsumexp_max:
        return value(q) - *std::max_element(q.begin(), q.end());
      case OperatorKind::logsumexp_min:
        return *std::min_element(q.begin(), q.end()) - value(q);
      case OperatorKind::sqrt_reg:
        throw Error(errc::unsupported_operation,
                    "max_approx_gap is defined for log-sum-exp kinds only");
    }
    throw Error(errc::internal_logic, "unknown operator kind");
  }

 private:
  SmoothOperator(OperatorKind kind, double lambda, std::size_t num_actions,
                 double smoothness, double zero_offset)
      : kind_(kind),
        lambda_(lambda),
        num_actions_(num_actions),
        smoothness_(smoothness),
        zero_offset_(zero_offset) {}

  static void check_params(double lambda, std::size_t num_actions) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw Error(errc::invalid_argument,
                  "regularization temperature must be positive and finite");
    }
    if (num_actions < 1) {
      throw Error(errc::invalid_argument, "need at least one action");
    }
  }

  void check_input(const QVector& q) const {
    detail::check_finite(q);
    if (q.size() != num_actions_) {
      throw Error(errc::invalid_argument,
                  "action-value vector length does not match the operator");
    }
  }

  double policy_weight(double u, double qa) const {
    const double t = lambda_ / 2.0 / (u - qa);
    return t * t;
  }

  // Max observed ratio |F(q) - F(q') - (q-q')'grad F(q')| / ||q-q'||_2^2 over
  // random pairs in [0, 10]^K, doubled.
  double estimate_smoothness() const {
    RngStream rng(0x5c00f5u);
    double worst = 0.0;
    QVector a(num_actions_), b(num_actions_);
    for (int trial = 0; trial < 4000; ++trial) {
      // Half the pairs are close together; curvature effects show up at
      // short range.
      const bool local = (trial % 2) == 0;
      double d2 = 0.0;
      for (std::size_t i = 0; i < num_actions_; ++i) {
        b[i] = rng.uniform(0.0, 10.0);
        a[i] = local ? std::clamp(b[i] + rng.uniform(-0.2, 0.2), 0.0, 10.0)
                     : rng.uniform(0.0, 10.0);
        d2 += (a[i] - b[i]) * (a[i] - b[i]);
      }
      if (d2 < 1e-12) continue;
      const QVector g = gradient(b);
      double lin = value(b);
      for (std::size_t i = 0; i < num_actions_; ++i) {
        lin += (a[i] - b[i]) * g[i];
      }
      worst = std::max(worst, std::abs(value(a) - lin) / d2);
    }
    return 2.0 * worst;
  }

  OperatorKind kind_;
  double lambda_;
  std::size_t num_actions_;
  double smoothness_;
  double zero_offset_;
};

}  // namespace smoothcruiser

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "smoothcruiser/environments.hpp"
#include "smoothcruiser/errors.hpp"
#include "smoothcruiser/operators.hpp"

namespace smoothcruiser {

// Fixed point of V(s) = F(Q_s) on a tabular model, with the final Q table and
// convergence diagnostics.
struct ValueTable {
  std::vector<double> v;
  std::vector<QVector> q;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> iterate_deltas;  // sup-norm change per sweep
};

namespace detail {

// Value iteration with a pluggable per-state aggregation of Q.
template <typename Aggregate>
ValueTable iterate_fixed_point(const TabularMdp& model, double gamma,
                               double tol, Aggregate&& aggregate) {
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw Error(errc::invalid_argument, "discount must lie in [0, 1)");
  }
  if (!(tol > 0.0)) {
    throw Error(errc::invalid_argument, "tolerance must be positive");
  }
  model.validate();
  const std::size_t S = model.n_states;
  const std::size_t A = model.n_actions;
  // Change threshold that converts iterate movement into a Bellman residual
  // of at most tol, via the gamma-contraction.
  const double threshold = gamma > 0.0 ? tol * (1.0 - gamma) / gamma : tol;

  ValueTable out;
  out.v.assign(S, 0.0);
  out.q.assign(S, QVector(A, 0.0));
  std::vector<double> next(S, 0.0);

  auto sweep = [&](const std::vector<double>& v, std::vector<double>& dst) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double ev = 0.0;
        for (std::size_t z = 0; z < S; ++z) ev += model.p(s, a, z) * v[z];
        out.q[s][a] = model.r(s, a) + gamma * ev;
      }
      dst[s] = aggregate(out.q[s]);
    }
  };

  const int max_iterations = 10'000'000;
  double change = 0.0;
  do {
    sweep(out.v, next);
    change = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      change = std::max(change, std::abs(next[s] - out.v[s]));
    }
    out.v.swap(next);
    out.iterate_deltas.push_back(change);
    if (++out.iterations > max_iterations) {
      throw Error(errc::numeric_failure,
                  "value iteration did not converge within the iteration cap");
    }
  } while (change > threshold);

  // Bellman residual of the returned table, measured directly.
  sweep(out.v, next);
  out.residual = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    out.residual = std::max(out.residual, std::abs(next[s] - out.v[s]));
  }
  // The final Q in out.q is consistent with out.v by construction of sweep.
  return out;
}

}  // namespace detail

// Regularized value function: V(s) = F(R(s,.) + gamma E_z V(z)).
inline ValueTable solve_regularized(const TabularMdp& model,
                                    const SmoothOperator& op, double gamma,
                                    double tol = 1e-10) {
  if (op.num_actions() != model.n_actions) {
    throw Error(errc::invalid_argument,
                "operator arity does not match the model's action count");
  }
  return detail::iterate_fixed_point(
      model, gamma, tol, [&op](const QVector& q) { return op.value(q); });
}

// Hard-max Bellman fixed point (no regularization).
inline ValueTable solve_unregularized(const TabularMdp& model, double gamma,
                                      double tol = 1e-10) {
  return detail::iterate_fixed_point(
      model, gamma, tol, [](const QVector& q) {
        return *std::max_element(q.begin(), q.end());
      });
}

}  // namespace smoothcruiser

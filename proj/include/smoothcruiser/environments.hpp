#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smoothcruiser/errors.hpp"
#include "smoothcruiser/rng.hpp"

namespace smoothcruiser {

// Explicit finite MDP with rewards in [0, 1]. Rewards may carry uniform noise
// of half-width reward_noise; the invariant below keeps noisy draws in [0, 1]
// without clamping bias.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;   // row-major [s][a][z]
  std::vector<double> reward_mean;  // [s][a]
  double reward_noise = 0.0;

  double p(std::size_t s, std::size_t a, std::size_t z) const {
    return transition[(s * n_actions + a) * n_states + z];
  }
  double& p(std::size_t s, std::size_t a, std::size_t z) {
    return transition[(s * n_actions + a) * n_states + z];
  }
  double r(std::size_t s, std::size_t a) const {
    return reward_mean[s * n_actions + a];
  }
  double& r(std::size_t s, std::size_t a) {
    return reward_mean[s * n_actions + a];
  }

  void validate() const {
    if (n_states < 1 || n_actions < 1) {
      throw Error(errc::invalid_argument, "model needs states and actions");
    }
    if (transition.size() != n_states * n_actions * n_states ||
        reward_mean.size() != n_states * n_actions) {
      throw Error(errc::invalid_argument, "model table sizes are inconsistent");
    }
    if (reward_noise < 0.0) {
      throw Error(errc::invalid_argument, "reward noise must be nonnegative");
    }
    for (std::size_t s = 0; s < n_states; ++s) {
      for (std::size_t a = 0; a < n_actions; ++a) {
        double row = 0.0;
        for (std::size_t z = 0; z < n_states; ++z) {
          const double pz = p(s, a, z);
          if (pz < 0.0) {
            throw Error(errc::invalid_argument,
                        "negative transition probability");
          }
          row += pz;
        }
        if (std::abs(row - 1.0) > 1e-12) {
          throw Error(errc::invalid_argument,
                      "transition row does not sum to 1");
        }
        const double mean = r(s, a);
        if (mean - reward_noise < -1e-12 || mean + reward_noise > 1.0 + 1e-12) {
          throw Error(errc::invalid_argument,
                      "reward range leaves [0, 1]");
        }
      }
    }
  }
};

struct EnvSpec {
  enum class Family { chain, gridworld };
  Family family = Family::chain;
  int n = 0;

  // Parses "chain:<n>" or "gridworld:<n>".
  static EnvSpec parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
      throw Error(errc::invalid_argument,
                  "environment spec must be family:<n>, e.g. chain:5");
    }
    const std::string_view family = text.substr(0, colon);
    const std::string_view size = text.substr(colon + 1);
    EnvSpec spec;
    if (family == "chain") {
      spec.family = Family::chain;
    } else if (family == "gridworld") {
      spec.family = Family::gridworld;
    } else {
      throw Error(errc::invalid_argument,
                  "unknown environment family '" + std::string(family) + "'");
    }
    try {
      std::size_t used = 0;
      spec.n = std::stoi(std::string(size), &used);
      if (used != size.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw Error(errc::invalid_argument,
                  "environment size must be an integer");
    }
    if (spec.n < 2) {
      throw Error(errc::invalid_argument, "environment size must be >= 2");
    }
    return spec;
  }

  std::string to_string() const {
    return (family == Family::chain ? std::string("chain:")
                                    : std::string("gridworld:")) +
           std::to_string(n);
  }

  std::size_t num_actions() const {
    return family == Family::chain ? 2 : 4;
  }
};

// Chain with n states: action 0 ("forward") moves s -> s+1 with reward 0,
// except the last state which self-loops with reward 1; action 1 ("back")
// jumps to state 0 with reward 0.1. All transitions deterministic.
//
// GridWorld n x n: actions N/S/E/W move deterministically, clamped at walls.
// The goal cell (n-1, n-1) is absorbing and every action taken there pays 1;
// all other rewards are 0.
inline TabularMdp build_env(const EnvSpec& spec, double reward_noise = 0.0) {
  TabularMdp m;
  if (spec.family == EnvSpec::Family::chain) {
    m.n_states = static_cast<std::size_t>(spec.n);
    m.n_actions = 2;
    m.transition.assign(m.n_states * 2 * m.n_states, 0.0);
    m.reward_mean.assign(m.n_states * 2, 0.0);
    for (std::size_t s = 0; s < m.n_states; ++s) {
      if (s + 1 < m.n_states) {
        m.p(s, 0, s + 1) = 1.0;
      } else {
        m.p(s, 0, s) = 1.0;
        m.r(s, 0) = 1.0;
      }
      m.p(s, 1, 0) = 1.0;
      m.r(s, 1) = 0.1;
    }
  } else {
    const std::size_t n = static_cast<std::size_t>(spec.n);
    m.n_states = n * n;
    m.n_actions = 4;
    m.transition.assign(m.n_states * 4 * m.n_states, 0.0);
    m.reward_mean.assign(m.n_states * 4, 0.0);
    const std::size_t goal = n * n - 1;  // cell (n-1, n-1)
    const int drow[4] = {-1, 1, 0, 0};   // N, S, E, W
    const int dcol[4] = {0, 0, 1, -1};
    for (std::size_t row = 0; row < n; ++row) {
      for (std::size_t col = 0; col < n; ++col) {
        const std::size_t s = row * n + col;
        for (std::size_t a = 0; a < 4; ++a) {
          if (s == goal) {
            m.p(s, a, goal) = 1.0;
            m.r(s, a) = 1.0;
            continue;
          }
          const long nr = std::clamp<long>(long(row) + drow[a], 0, long(n) - 1);
          const long nc = std::clamp<long>(long(col) + dcol[a], 0, long(n) - 1);
          m.p(s, a, std::size_t(nr) * n + std::size_t(nc)) = 1.0;
        }
      }
    }
  }
  if (reward_noise > 0.0) {
    // Shrink the noise so every reward stays in [0, 1].
    double cap = 0.5;
    for (std::size_t i = 0; i < m.reward_mean.size(); ++i) {
      cap = std::min(cap, std::min(m.reward_mean[i], 1.0 - m.reward_mean[i]));
    }
    m.reward_noise = std::min(reward_noise, cap);
  }
  m.validate();
  return m;
}

// Sampling interface over a TabularMdp with exact call counting. Each call
// increments the counter by exactly 1 and returns a draw independent of all
// previous ones. Randomness is counter-based and keyed by (seed, call index),
// so concurrent invocation does not change marginal distributions; callers
// that need bit-reproducibility under concurrency pass their own stream.
class GenerativeOracle {
 public:
  GenerativeOracle(const TabularMdp& model, std::uint64_t seed)
      : model_(&model), seed_(seed) {
    model.validate();
  }

  // Draws (reward, next_state) using the oracle's own stream.
  std::pair<double, std::size_t> call(std::size_t s, std::size_t a) {
    check_indices(s, a);
    const std::uint64_t idx = calls_.fetch_add(1, std::memory_order_relaxed);
    RngStream rng = RngStream(seed_).child(idx);
    return draw(s, a, rng);
  }

  // Same draw semantics, randomness supplied by the caller.
  std::pair<double, std::size_t> call(std::size_t s, std::size_t a,
                                      RngStream& rng) {
    check_indices(s, a);
    calls_.fetch_add(1, std::memory_order_relaxed);
    return draw(s, a, rng);
  }

  std::uint64_t call_count() const {
    return calls_.load(std::memory_order_relaxed);
  }

  const TabularMdp& model() const { return *model_; }

 private:
  void check_indices(std::size_t s, std::size_t a) const {
    if (s >= model_->n_states || a >= model_->n_actions) {
      throw Error(errc::invalid_argument, "state or action index out of range");
    }
  }

  std::pair<double, std::size_t> draw(std::size_t s, std::size_t a,
                                      RngStream& rng) const {
    const double u = rng.next_double();
    std::size_t z = model_->n_states - 1;
    double acc = 0.0;
    for (std::size_t cand = 0; cand < model_->n_states; ++cand) {
      acc += model_->p(s, a, cand);
      if (u < acc) {
        z = cand;
        break;
      }
    }
    double reward = model_->r(s, a);
    if (model_->reward_noise > 0.0) {
      reward += rng.uniform(-model_->reward_noise, model_->reward_noise);
    }
    reward = std::clamp(reward, 0.0, 1.0);
    return {reward, z};
  }

  const TabularMdp* model_;
  std::uint64_t seed_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace smoothcruiser

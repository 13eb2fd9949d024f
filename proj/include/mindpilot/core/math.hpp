#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mindpilot/core/error.hpp"
#include "mindpilot/core/rng.hpp"

namespace mindpilot {

using Embedding = Eigen::VectorXd;
/// Per-item scores S_t, indexed by catalog order.
using ScoreTable = Eigen::VectorXd;
/// Per-item selection probabilities P_t, indexed by catalog order.
using ProbTable = Eigen::VectorXd;

inline bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& v) { return v.allFinite(); }

inline double cosine_sim(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch,
          "cosine_sim: length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  const double na = a.norm();
  const double nb = b.norm();
  require(na > 0.0 && nb > 0.0, ErrorCode::degenerate_vector, "degenerate vector");
  const double s = a.dot(b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

/// exp(score / temperature), normalized; max-subtracted so large scores do not overflow.
inline ProbTable softmax(const Eigen::Ref<const ScoreTable>& scores, double temperature = 1.0) {
  require(temperature > 0.0 && std::isfinite(temperature), ErrorCode::invalid_argument,
          "softmax: temperature must be positive");
  require(scores.size() > 0, ErrorCode::invalid_argument, "softmax: empty score table");
  require(scores.allFinite(), ErrorCode::non_finite, "softmax: non-finite score");
  const double peak = scores.maxCoeff();
  ProbTable p = ((scores.array() - peak) / temperature).exp().matrix();
  return p / p.sum();
}

namespace detail {
/// Draws one index from exp(log_weights) restricted to entries not yet taken.
/// `weights` caches exp(log_weights - peak); it is rebuilt against the current
/// remaining maximum only when the remaining mass approaches underflow.
inline std::size_t sample_log_weights(std::span<const double> log_weights, const std::vector<char>& taken,
                                      std::vector<double>& weights, double& peak, Rng& rng) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  auto rebuild = [&] {
    peak = ninf;
    for (std::size_t i = 0; i < log_weights.size(); ++i)
      if (!taken[i]) peak = std::max(peak, log_weights[i]);
    weights.assign(log_weights.size(), 0.0);
    for (std::size_t i = 0; i < log_weights.size(); ++i)
      if (!taken[i] && log_weights[i] > ninf) weights[i] = std::exp(log_weights[i] - peak);
  };
  auto remaining = [&] {
    double m = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i)
      if (!taken[i]) m += weights[i];
    return m;
  };
  if (weights.empty()) rebuild();
  double mass = remaining();
  if (mass < 1e-200) {
    rebuild();
    mass = remaining();
  }
  double u = rng.uniform() * mass;
  std::size_t last = log_weights.size();
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    if (taken[i] || log_weights[i] == ninf) continue;
    last = i;
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return last;  // rounding left a sliver of mass; fall back to the last eligible entry
}
}  // namespace detail

/// Roulette-wheel draw of `n` distinct indices from unnormalized log-weights.
/// Each draw renormalizes over the entries not yet taken, which is the same
/// distribution as sequential renormalization of exp(log_weights) but never
/// underflows when the weights span many orders of magnitude.
inline std::vector<std::size_t> roulette_sample_log(std::span<const double> log_weights, std::size_t n, Rng& rng) {
  std::size_t eligible = 0;
  for (double w : log_weights) {
    require(!std::isnan(w) && w != std::numeric_limits<double>::infinity(), ErrorCode::non_finite,
            "roulette_sample: invalid log weight");
    if (w > -std::numeric_limits<double>::infinity()) ++eligible;
  }
  require(n <= eligible, ErrorCode::invalid_argument,
          "roulette_sample: requested " + std::to_string(n) + " items but only " + std::to_string(eligible) +
              " have nonzero probability");
  std::vector<char> taken(log_weights.size(), 0);
  std::vector<double> weights;
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = detail::sample_log_weights(log_weights, taken, weights, peak, rng);
    taken[i] = 1;
    out.push_back(i);
  }
  return out;
}

/// Roulette-wheel draw of `n` distinct indices proportional to `probs`.
inline std::vector<std::size_t> roulette_sample(const Eigen::Ref<const ProbTable>& probs, std::size_t n, Rng& rng) {
  std::vector<double> logw(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    require(std::isfinite(probs[i]) && probs[i] >= 0.0, ErrorCode::invalid_argument,
            "roulette_sample: probabilities must be finite and non-negative");
    logw[static_cast<std::size_t>(i)] = probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
  }
  return roulette_sample_log(logw, n, rng);
}

/// Shannon entropy in nats.
inline double entropy(const Eigen::Ref<const ProbTable>& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

}  // namespace mindpilot

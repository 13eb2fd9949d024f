#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/core/rng.hpp"
#include "mindpilot/stats.hpp"

namespace mindpilot {

/// How P_{t+1} is derived after the score updates.
enum class ProbabilityRule {
  /// P = softmax(S / temperature).
  softmax,
  /// Variant: multiply the top-k items' current probabilities by
  /// `boost_factor`, then renormalize. Scores are still tracked.
  multiplicative,
};

struct SearchConfig {
  double alpha = 0.1;
  double beta = 0.1;
  std::size_t top_k = 2;
  std::size_t batch_size = 10;
  std::size_t max_iterations = 10;
  /// Stop once a round's best reward reaches this value.
  std::optional<double> threshold;
  double temperature = 1.0;
  /// z-score rewards within each round before the direct update.
  bool normalize_rewards = false;
  ProbabilityRule rule = ProbabilityRule::softmax;
  double boost_factor = 2.0;

  void validate(std::size_t catalog_size) const {
    require(alpha > 0.0 && alpha <= 1.0, ErrorCode::invalid_argument, "alpha must lie in (0, 1]");
    require(beta >= 0.0 && beta <= 1.0, ErrorCode::invalid_argument, "beta must lie in [0, 1]");
    require(top_k >= 1 && top_k <= batch_size, ErrorCode::invalid_argument, "need 1 <= top_k <= batch_size");
    require(batch_size <= catalog_size, ErrorCode::invalid_argument,
            "batch_size " + std::to_string(batch_size) + " exceeds catalog size " + std::to_string(catalog_size));
    require(max_iterations >= 1, ErrorCode::invalid_argument, "max_iterations must be >= 1");
    require(temperature > 0.0, ErrorCode::invalid_argument, "temperature must be positive");
    require(boost_factor > 0.0, ErrorCode::invalid_argument, "boost_factor must be positive");
  }
};

inline void to_json(Json& j, const SearchConfig& c) {
  j = Json{{"alpha", c.alpha},
           {"beta", c.beta},
           {"top_k", c.top_k},
           {"batch_size", c.batch_size},
           {"max_iterations", c.max_iterations},
           {"threshold", c.threshold ? Json(*c.threshold) : Json(nullptr)},
           {"temperature", c.temperature},
           {"normalize_rewards", c.normalize_rewards},
           {"rule", c.rule == ProbabilityRule::softmax ? "softmax" : "multiplicative"},
           {"boost_factor", c.boost_factor}};
}

inline void from_json(const Json& j, SearchConfig& c) {
  read_optional(j, "alpha", c.alpha);
  read_optional(j, "beta", c.beta);
  read_optional(j, "top_k", c.top_k);
  read_optional(j, "batch_size", c.batch_size);
  read_optional(j, "max_iterations", c.max_iterations);
  if (auto it = j.find("threshold"); it != j.end()) c.threshold = it->is_null() ? std::nullopt : std::optional(it->get<double>());
  read_optional(j, "temperature", c.temperature);
  read_optional(j, "normalize_rewards", c.normalize_rewards);
  if (auto it = j.find("rule"); it != j.end()) {
    const auto s = it->get<std::string>();
    require(s == "softmax" || s == "multiplicative", ErrorCode::invalid_argument, "unknown probability rule '" + s + "'");
    c.rule = s == "softmax" ? ProbabilityRule::softmax : ProbabilityRule::multiplicative;
  }
  read_optional(j, "boost_factor", c.boost_factor);
}

struct HistoryEntry {
  std::size_t iteration = 0;
  std::size_t index = 0;
  std::string id;
  double reward = 0.0;
};

struct BestItem {
  std::string id;
  std::size_t index = 0;
  double reward = -std::numeric_limits<double>::infinity();
};

struct SessionState {
  std::size_t t = 0;
  ScoreTable scores;
  ProbTable probs;
  std::vector<HistoryEntry> history;
  std::optional<BestItem> best;
  Rng rng;
  bool done = false;
};

/// One completed round.
struct StepRecord {
  std::size_t iteration = 0;  // value of t after the step (1-based round number)
  std::vector<std::size_t> batch;
  std::vector<std::string> ids;
  std::vector<double> rewards;
  std::vector<std::size_t> best_set;
  ScoreTable scores;
  ProbTable probs;
  BestItem best;  // best so far
  bool stopped_early = false;

  /// Catalog index of this round's highest-reward item (ties: lowest index).
  std::size_t round_best() const { return best_set.front(); }
  double round_best_reward() const { return *std::max_element(rewards.begin(), rewards.end()); }
};

inline Json step_to_json(const StepRecord& r) {
  Json j{{"round", r.iteration},
         {"batch", r.batch},
         {"ids", r.ids},
         {"rewards", r.rewards},
         {"best_set", r.best_set},
         {"scores", to_json_array(r.scores)},
         {"probs", to_json_array(r.probs)},
         {"best", {{"id", r.best.id}, {"index", r.best.index}, {"reward", r.best.reward}}}};
  if (r.stopped_early) j["stopped_early"] = true;
  return j;
}

// ---------------------------------------------------------------------------
// Update rules

/// Uniform prior: S_0(j) = 1/N and P_0 = softmax(S_0) (also uniform).
inline SessionState init_session(const Catalog& catalog, const SearchConfig& config, std::uint64_t seed) {
  config.validate(catalog.size());
  SessionState s;
  const auto n = static_cast<Eigen::Index>(catalog.size());
  s.scores = ScoreTable::Constant(n, 1.0 / static_cast<double>(n));
  s.probs = softmax(s.scores, config.temperature);
  s.rng = Rng(seed, 0);
  return s;
}

/// Direct reward update: S'(i) = (1 - alpha) S(i) + alpha r_i for i in the
/// best set; every other entry is copied unchanged.
inline ScoreTable direct_reward_update(const ScoreTable& scores, std::span<const std::pair<std::size_t, double>> rewards,
                                       std::span<const std::size_t> best_set, double alpha) {
  ScoreTable out = scores;
  for (std::size_t i : best_set) {
    require(i < static_cast<std::size_t>(scores.size()), ErrorCode::invalid_argument,
            "direct_reward_update: index " + std::to_string(i) + " out of range");
    auto it = std::find_if(rewards.begin(), rewards.end(), [i](const auto& p) { return p.first == i; });
    require(it != rewards.end(), ErrorCode::invalid_argument,
            "direct_reward_update: best-set index " + std::to_string(i) + " was not evaluated");
    out[static_cast<Eigen::Index>(i)] = (1.0 - alpha) * scores[static_cast<Eigen::Index>(i)] + alpha * it->second;
  }
  return out;
}

/// Spreading update:
///   S_{t+1}(j) = (1 - beta) S'(j)
///              + beta / |I| * sum_{i in I} S'(i) exp(s(u_i,u_j)) / sum_l exp(s(u_i,u_l))
inline ScoreTable spreading_update(const ScoreTable& scores_prime, const Catalog& catalog,
                                   std::span<const std::size_t> best_set, double beta) {
  require(!best_set.empty(), ErrorCode::invalid_argument, "spreading_update: empty best set");
  require(static_cast<std::size_t>(scores_prime.size()) == catalog.size(), ErrorCode::shape_mismatch,
          "spreading_update: score table does not match catalog size");
  if (beta == 0.0) return scores_prime;
  Eigen::VectorXd spread = Eigen::VectorXd::Zero(scores_prime.size());
  for (std::size_t i : best_set) {
    require(i < catalog.size(), ErrorCode::invalid_argument, "spreading_update: index out of range");
    const Eigen::VectorXd& row = catalog.exp_similarity_row(i);
    spread += (scores_prime[static_cast<Eigen::Index>(i)] / row.sum()) * row;
  }
  return (1.0 - beta) * scores_prime + (beta / static_cast<double>(best_set.size())) * spread;
}

/// Indices of the k largest rewards; ties go to the lowest catalog index.
inline std::vector<std::size_t> select_top_k(std::span<const std::size_t> batch, std::span<const double> rewards,
                                             std::size_t k) {
  require(batch.size() == rewards.size(), ErrorCode::shape_mismatch, "select_top_k: batch/reward length mismatch");
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rewards[a] != rewards[b]) return rewards[a] > rewards[b];
    return batch[a] < batch[b];
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(batch[order[i]]);
  return out;
}

/// Within-round z-scores; all zeros when the round has no spread.
inline std::vector<double> standardize(std::span<const double> rewards) {
  const double m = stats::mean(rewards);
  double ss = 0.0;
  for (double r : rewards) ss += (r - m) * (r - m);
  const double sd = rewards.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(rewards.size()));
  std::vector<double> z(rewards.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t i = 0; i < rewards.size(); ++i) z[i] = (rewards[i] - m) / sd;
  return z;
}

// ---------------------------------------------------------------------------
// Step mechanics (ask / tell)

/// Draws the next batch from P_t by roulette without replacement. Sampling works
/// on log-probabilities so sharply peaked distributions stay exact.
inline std::vector<std::size_t> propose_batch(SessionState& state, const SearchConfig& config) {
  std::vector<double> logw(static_cast<std::size_t>(state.scores.size()));
  if (config.rule == ProbabilityRule::softmax) {
    for (std::size_t j = 0; j < logw.size(); ++j) logw[j] = state.scores[static_cast<Eigen::Index>(j)] / config.temperature;
  } else {
    for (std::size_t j = 0; j < logw.size(); ++j) {
      const double p = state.probs[static_cast<Eigen::Index>(j)];
      logw[j] = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
  }
  return roulette_sample_log(logw, config.batch_size, state.rng);
}

/// Applies one round's rewards (aligned with `batch`) to the state.
inline StepRecord commit_batch(SessionState& state, const Catalog& catalog, const SearchConfig& config,
                               std::span<const std::size_t> batch, std::span<const double> rewards) {
  require(batch.size() == rewards.size() && !batch.empty(), ErrorCode::shape_mismatch,
          "commit_batch: rewards must align with the batch");
  for (double r : rewards) require(std::isfinite(r), ErrorCode::non_finite, "commit_batch: non-finite reward");

  const std::vector<std::size_t> best_set = select_top_k(batch, rewards, config.top_k);
  std::vector<double> update_rewards(rewards.begin(), rewards.end());
  if (config.normalize_rewards) update_rewards = standardize(rewards);
  std::vector<std::pair<std::size_t, double>> pairs;
  pairs.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) pairs.emplace_back(batch[b], update_rewards[b]);

  const ScoreTable prime = direct_reward_update(state.scores, pairs, best_set, config.alpha);
  state.scores = spreading_update(prime, catalog, best_set, config.beta);
  if (config.rule == ProbabilityRule::softmax) {
    state.probs = softmax(state.scores, config.temperature);
  } else {
    for (std::size_t i : best_set) state.probs[static_cast<Eigen::Index>(i)] *= config.boost_factor;
    state.probs /= state.probs.sum();
  }

  state.t += 1;
  StepRecord rec;
  rec.iteration = state.t;
  rec.batch.assign(batch.begin(), batch.end());
  rec.rewards.assign(rewards.begin(), rewards.end());
  rec.best_set = best_set;
  double round_max = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Item& item = catalog[batch[b]];
    rec.ids.push_back(item.id);
    state.history.push_back({state.t, batch[b], item.id, rewards[b]});
    if (!state.best || rewards[b] > state.best->reward) state.best = BestItem{item.id, batch[b], rewards[b]};
    round_max = std::max(round_max, rewards[b]);
  }
  rec.scores = state.scores;
  rec.probs = state.probs;
  rec.best = *state.best;
  if (config.threshold && round_max >= *config.threshold) rec.stopped_early = true;
  state.done = rec.stopped_early || state.t >= config.max_iterations;
  return rec;
}

/// Evaluates `reward_fn` over a batch in batch order; failures are rethrown with item context.
inline std::vector<double> evaluate_batch(const Catalog& catalog, std::span<const std::size_t> batch,
                                          const RewardFn& reward_fn) {
  std::vector<double> rewards;
  rewards.reserve(batch.size());
  for (std::size_t i : batch) {
    const Item& item = catalog[i];
    try {
      rewards.push_back(reward_fn(item));
    } catch (const std::exception& e) {
      fail(ErrorCode::evaluation_failed, "reward evaluation failed for item '" + item.id + "': " + e.what());
    }
  }
  return rewards;
}

inline StepRecord search_step(SessionState& state, const Catalog& catalog, const SearchConfig& config,
                              const RewardFn& reward_fn) {
  require(!state.done && state.t < config.max_iterations, ErrorCode::invalid_argument,
          "search_step: session already finished");
  const auto batch = propose_batch(state, config);
  const auto rewards = evaluate_batch(catalog, batch, reward_fn);
  return commit_batch(state, catalog, config, batch, rewards);
}

struct SearchTrace {
  std::vector<StepRecord> steps;
  SessionState final_state;

  /// Catalog index of argmax_j S(j) after the last step (ties: lowest index).
  std::size_t argmax_score() const {
    Eigen::Index i = 0;
    final_state.scores.maxCoeff(&i);
    return static_cast<std::size_t>(i);
  }
};

inline SearchTrace run_search(const Catalog& catalog, const SearchConfig& config, const RewardFn& reward_fn,
                              std::uint64_t seed) {
  SearchTrace trace;
  trace.final_state = init_session(catalog, config, seed);
  while (!trace.final_state.done) trace.steps.push_back(search_step(trace.final_state, catalog, config, reward_fn));
  return trace;
}

/// Owning ask/tell wrapper used by interactive sessions, where rewards arrive
/// asynchronously (e.g. human ratings).
class SearchEngine {
 public:
  SearchEngine(Catalog catalog, SearchConfig config, std::uint64_t seed)
      : catalog_(std::move(catalog)), config_(config), state_(init_session(catalog_, config_, seed)) {}

  /// Pending batch; drawn on first call and stable until committed.
  const std::vector<std::size_t>& propose() {
    require(!state_.done, ErrorCode::invalid_argument, "search session is finished");
    if (!pending_) pending_ = propose_batch(state_, config_);
    return *pending_;
  }

  bool has_pending() const noexcept { return pending_.has_value(); }

  StepRecord commit(std::span<const double> rewards) {
    require(pending_.has_value(), ErrorCode::invalid_argument, "no pending batch to commit");
    StepRecord rec = commit_batch(state_, catalog_, config_, *pending_, rewards);
    pending_.reset();
    return rec;
  }

  StepRecord step(const RewardFn& reward_fn) {
    const auto& batch = propose();
    const auto rewards = evaluate_batch(catalog_, batch, reward_fn);
    return commit(rewards);
  }

  bool done() const noexcept { return state_.done; }
  const SessionState& state() const noexcept { return state_; }
  const Catalog& catalog() const noexcept { return catalog_; }
  const SearchConfig& config() const noexcept { return config_; }

 private:
  Catalog catalog_;
  SearchConfig config_;
  SessionState state_;
  std::optional<std::vector<std::size_t>> pending_;
};

inline Json state_to_json(const SessionState& s) {
  Json history = Json::array();
  for (const auto& h : s.history) history.push_back({h.iteration, h.index, h.id, h.reward});
  Json j{{"t", s.t},
         {"scores", to_json_array(s.scores)},
         {"probs", to_json_array(s.probs)},
         {"history", std::move(history)},
         {"rng", s.rng.state()},
         {"done", s.done}};
  if (s.best) j["best"] = {{"id", s.best->id}, {"index", s.best->index}, {"reward", s.best->reward}};
  return j;
}

}  // namespace mindpilot

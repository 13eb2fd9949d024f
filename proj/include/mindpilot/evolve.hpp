#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/core/rng.hpp"
#include "mindpilot/search.hpp"
#include "mindpilot/surrogate.hpp"

namespace mindpilot {

// ---------------------------------------------------------------------------
// Variation operators

/// Splices eA[0, c) with eB[c, F) for c drawn uniformly from [0, F].
inline Embedding crossover_at(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                              Eigen::Index c) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch, "crossover: parent lengths differ");
  require(c >= 0 && c <= a.size(), ErrorCode::invalid_argument, "crossover: start index out of range");
  Embedding out(a.size());
  out.head(c) = a.head(c);
  out.tail(a.size() - c) = b.tail(a.size() - c);
  return out;
}

inline Embedding crossover(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                           Rng& rng) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch, "crossover: parent lengths differ");
  const auto c = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(a.size()) + 1));
  return crossover_at(a, b, c);
}

/// e * (1 + delta) with one shared delta ~ U(-sigma_m, sigma_m).
inline Embedding mutate(const Eigen::Ref<const Eigen::VectorXd>& e, double sigma_m, Rng& rng) {
  require(sigma_m >= 0.0 && sigma_m < 1.0, ErrorCode::invalid_argument, "mutate: sigma_m must lie in [0, 1)");
  if (sigma_m == 0.0) return e;
  return e * (1.0 + rng.uniform(-sigma_m, sigma_m));
}

/// Up to m distinct corpus items whose ids are not in `used`, uniformly at random.
inline std::vector<Item> novelty_inject(const Catalog& corpus, const std::unordered_set<std::string>& used, std::size_t m,
                                        Rng& rng) {
  std::vector<std::size_t> unused;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!used.count(corpus[i].id)) unused.push_back(i);
  std::vector<Item> out;
  for (std::size_t k = 0; k < m && !unused.empty(); ++k) {
    const std::size_t pick = rng.index(unused.size());
    out.push_back(corpus[unused[pick]]);
    unused.erase(unused.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator

struct Generated {
  Embedding embedding;
  std::optional<std::string> payload;
  /// Corpus id the output was taken from (nearest-neighbor mode).
  std::optional<std::string> source_id;
};

enum class GeneratorMode { identity, nearest_neighbor, custom };

/// Maps a (guided) embedding to a realizable stimulus.
class Generator {
 public:
  using Fn = std::function<Generated(const Embedding&)>;

  static Generator identity() { return Generator(GeneratorMode::identity, nullptr, nullptr); }

  static Generator nearest_neighbor(std::shared_ptr<const Catalog> corpus) {
    require(corpus && !corpus->empty(), ErrorCode::invalid_argument, "nearest-neighbor generator needs a corpus");
    return Generator(GeneratorMode::nearest_neighbor, std::move(corpus), nullptr);
  }

  static Generator custom(Fn fn) { return Generator(GeneratorMode::custom, nullptr, std::move(fn)); }

  Generated operator()(const Embedding& e) const {
    switch (mode_) {
      case GeneratorMode::identity:
        return {e, std::nullopt, std::nullopt};
      case GeneratorMode::nearest_neighbor: {
        require(e.size() == corpus_->dim(), ErrorCode::shape_mismatch, "generator: embedding length mismatch");
        const double norm = e.norm();
        require(norm > 0.0, ErrorCode::degenerate_vector, "degenerate vector");
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t i = 0; i < corpus_->size(); ++i) {
          const double s = corpus_->unit_embedding(i).dot(e) / norm;
          if (s > best_sim) best_sim = s, best = i;
        }
        const Item& item = (*corpus_)[best];
        return {item.embedding, item.payload, item.id};
      }
      case GeneratorMode::custom:
        return fn_(e);
    }
    fail(ErrorCode::invalid_argument, "generator: unknown mode");
  }

  GeneratorMode mode() const noexcept { return mode_; }

 private:
  Generator(GeneratorMode mode, std::shared_ptr<const Catalog> corpus, Fn fn)
      : mode_(mode), corpus_(std::move(corpus)), fn_(std::move(fn)) {}

  GeneratorMode mode_;
  std::shared_ptr<const Catalog> corpus_;
  Fn fn_;
};

inline std::string to_string(GeneratorMode m) {
  switch (m) {
    case GeneratorMode::identity: return "identity";
    case GeneratorMode::nearest_neighbor: return "nearest-neighbor";
    case GeneratorMode::custom: return "custom";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Configuration and state

struct EvolveConfig {
  std::size_t parent_pool = 4;
  std::size_t offspring = 2;
  std::size_t novelty = 1;
  std::size_t seed_count = 10;
  double mutation_scale = 0.1;
  double alpha = 0.1;
  double beta = 0.1;
  std::size_t top_k = 2;
  double temperature = 1.0;
  std::size_t max_iterations = 10;
  /// Total reward queries including the seed round; replaces max_iterations when set.
  std::optional<std::size_t> budget;
  GuidanceConfig guidance;
  bool use_guidance = true;
  double ridge = 1e-3;
  double kernel_variance = 1.0;
  /// Re-derive the median-heuristic lengthscale and refit from scratch every
  /// iteration instead of appending to the factorization.
  bool refit_lengthscale = false;

  void validate() const {
    require(parent_pool >= 2, ErrorCode::invalid_argument, "parent_pool must be >= 2");
    require(offspring >= 1, ErrorCode::invalid_argument, "offspring must be >= 1");
    require(seed_count >= 2, ErrorCode::invalid_argument, "seed_count must be >= 2");
    require(mutation_scale >= 0.0 && mutation_scale < 1.0, ErrorCode::invalid_argument,
            "mutation_scale must lie in [0, 1)");
    require(alpha > 0.0 && alpha <= 1.0, ErrorCode::invalid_argument, "alpha must lie in (0, 1]");
    require(beta >= 0.0 && beta <= 1.0, ErrorCode::invalid_argument, "beta must lie in [0, 1]");
    require(top_k >= 1, ErrorCode::invalid_argument, "top_k must be >= 1");
    require(temperature > 0.0, ErrorCode::invalid_argument, "temperature must be positive");
    require(ridge >= 0.0 && kernel_variance > 0.0, ErrorCode::invalid_argument, "invalid GP hyperparameters");
    require(!budget || *budget >= 2, ErrorCode::invalid_argument, "budget must be >= 2");
    guidance.validate();
  }

  /// Seed round size after applying the budget.
  std::size_t effective_seed_count() const {
    if (!budget) return seed_count;
    if (*budget <= seed_count) return std::max<std::size_t>(2, *budget > offspring ? *budget - offspring : *budget);
    return seed_count;
  }

  /// Offspring iterations after the seed round.
  std::size_t planned_iterations() const {
    if (!budget) return max_iterations;
    const std::size_t seeds = effective_seed_count();
    const std::size_t left = *budget > seeds ? *budget - seeds : 0;
    return (left + offspring - 1) / offspring;
  }
};

inline void to_json(Json& j, const EvolveConfig& c) {
  j = Json{{"parent_pool", c.parent_pool},
           {"offspring", c.offspring},
           {"novelty", c.novelty},
           {"seed_count", c.seed_count},
           {"mutation_scale", c.mutation_scale},
           {"alpha", c.alpha},
           {"beta", c.beta},
           {"top_k", c.top_k},
           {"temperature", c.temperature},
           {"max_iterations", c.max_iterations},
           {"budget", c.budget ? Json(*c.budget) : Json(nullptr)},
           {"guidance", c.guidance},
           {"use_guidance", c.use_guidance},
           {"ridge", c.ridge},
           {"kernel_variance", c.kernel_variance},
           {"refit_lengthscale", c.refit_lengthscale}};
}

inline void from_json(const Json& j, EvolveConfig& c) {
  read_optional(j, "parent_pool", c.parent_pool);
  read_optional(j, "offspring", c.offspring);
  read_optional(j, "novelty", c.novelty);
  read_optional(j, "seed_count", c.seed_count);
  read_optional(j, "mutation_scale", c.mutation_scale);
  read_optional(j, "alpha", c.alpha);
  read_optional(j, "beta", c.beta);
  read_optional(j, "top_k", c.top_k);
  read_optional(j, "temperature", c.temperature);
  read_optional(j, "max_iterations", c.max_iterations);
  if (auto it = j.find("budget"); it != j.end())
    c.budget = it->is_null() ? std::nullopt : std::optional<std::size_t>(it->get<std::size_t>());
  if (auto it = j.find("guidance"); it != j.end()) c.guidance = it->get<GuidanceConfig>();
  read_optional(j, "use_guidance", c.use_guidance);
  read_optional(j, "ridge", c.ridge);
  read_optional(j, "kernel_variance", c.kernel_variance);
  read_optional(j, "refit_lengthscale", c.refit_lengthscale);
}

/// One evaluated offspring (pending until its reward is committed).
struct Offspring {
  Item item;
  std::size_t parent_a = 0;
  std::size_t parent_b = 0;
  Eigen::Index cut = 0;
  double delta = 0.0;
  std::optional<std::string> source_id;
};

struct EvolveRecord {
  /// 0 for the seed round, then 1..planned_iterations.
  std::size_t iteration = 0;
  std::vector<std::string> parents;
  std::vector<std::string> ids;
  std::vector<std::optional<std::string>> sources;
  std::vector<double> rewards;
  std::vector<std::string> best_set;
  std::vector<std::string> novelty;
  std::vector<std::string> failures;
  double eta = 0.0;
  std::size_t catalog_size = 0;
  std::size_t gp_size = 0;
  double lengthscale = 0.0;
  BestItem best;
  std::size_t queries = 0;

  double round_best_reward() const {
    return rewards.empty() ? -std::numeric_limits<double>::infinity() : *std::max_element(rewards.begin(), rewards.end());
  }
};

inline Json evolve_record_to_json(const EvolveRecord& r) {
  Json sources = Json::array();
  for (const auto& s : r.sources) sources.push_back(s ? Json(*s) : Json(nullptr));
  return Json{{"round", r.iteration},
              {"parents", r.parents},
              {"ids", r.ids},
              {"sources", std::move(sources)},
              {"rewards", r.rewards},
              {"best_set", r.best_set},
              {"novelty", r.novelty},
              {"failures", r.failures},
              {"eta", r.eta},
              {"catalog_size", r.catalog_size},
              {"gp", {{"n", r.gp_size}, {"lengthscale", r.lengthscale}}},
              {"best", {{"id", r.best.id}, {"index", r.best.index}, {"reward", r.best.reward}}},
              {"queries", r.queries}};
}

struct EvolveState {
  /// Omega_t; grows every iteration. Indices are stable.
  Catalog catalog;
  ScoreTable scores;
  ProbTable probs;
  GPModel gp;
  Rng rng;
  /// Completed offspring iterations (the seed round is iteration 0).
  std::size_t t = 0;
  bool seeded = false;
  bool done = false;
  std::size_t queries = 0;
  std::optional<BestItem> best;
  std::vector<HistoryEntry> history;
  std::unordered_set<std::string> used;
};

inline Json state_to_json(const EvolveState& s) {
  Json history = Json::array();
  for (const auto& h : s.history) history.push_back({h.iteration, h.index, h.id, h.reward});
  std::vector<std::string> used(s.used.begin(), s.used.end());
  std::sort(used.begin(), used.end());
  Json ids = Json::array();
  for (const auto& item : s.catalog.items()) ids.push_back(item.id);
  Json j{{"t", s.t},
         {"seeded", s.seeded},
         {"done", s.done},
         {"queries", s.queries},
         {"catalog", std::move(ids)},
         {"scores", to_json_array(s.scores)},
         {"probs", to_json_array(s.probs)},
         {"history", std::move(history)},
         {"used", used},
         {"rng", s.rng.state()}};
  if (s.gp.fitted()) j["gp"] = {{"n", s.gp.size()}, {"weights", to_json_array(s.gp.weights())}};
  if (s.best) j["best"] = {{"id", s.best->id}, {"index", s.best->index}, {"reward", s.best->reward}};
  return j;
}

// ---------------------------------------------------------------------------
// Engine

/// Closed-loop heuristic generation with ask/tell control.
///
/// Round 0 evaluates `seed_count` corpus items drawn uniformly. Every later
/// round selects parents by roulette over P_t, breeds offspring (crossover,
/// mutation, GP pseudo-target), realizes them through the generator, and after
/// commit extends the catalog with offspring and novelty items.
class EvolveEngine {
 public:
  EvolveEngine(std::shared_ptr<const Catalog> corpus, EvolveConfig config, Generator generator, std::uint64_t seed)
      : corpus_(std::move(corpus)), config_(std::move(config)), generator_(std::move(generator)) {
    config_.validate();
    require(corpus_ && corpus_->size() >= config_.effective_seed_count(), ErrorCode::invalid_argument,
            "evolve corpus must hold at least seed_count items");
    state_.rng = Rng(seed, 0x65766f);
    planned_ = config_.planned_iterations();
  }

  /// Items awaiting rewards; stable until commit.
  const std::vector<Item>& propose() {
    require(!state_.done, ErrorCode::invalid_argument, "evolve session is finished");
    if (!pending_) state_.seeded ? breed() : draw_seeds();
    return pending_items_;
  }

  bool has_pending() const noexcept { return pending_.has_value(); }
  /// Generator failures of the pending round.
  const std::vector<std::string>& pending_failures() const noexcept { return pending_failures_; }

  EvolveRecord commit(std::span<const double> rewards) {
    require(pending_.has_value(), ErrorCode::invalid_argument, "no pending batch to commit");
    require(rewards.size() == pending_items_.size(), ErrorCode::shape_mismatch,
            "evolve commit: expected " + std::to_string(pending_items_.size()) + " rewards, got " +
                std::to_string(rewards.size()));
    for (double r : rewards) require(std::isfinite(r), ErrorCode::non_finite, "evolve commit: non-finite reward");
    EvolveRecord rec = state_.seeded ? commit_offspring(rewards) : commit_seeds(rewards);
    pending_.reset();
    pending_items_.clear();
    pending_failures_.clear();
    return rec;
  }

  EvolveRecord step(const RewardFn& reward_fn) {
    const auto& items = propose();
    std::vector<double> rewards;
    rewards.reserve(items.size());
    for (const auto& item : items) {
      try {
        rewards.push_back(reward_fn(item));
      } catch (const std::exception& e) {
        fail(ErrorCode::evaluation_failed, "reward evaluation failed for item '" + item.id + "': " + e.what());
      }
    }
    return commit(rewards);
  }

  bool done() const noexcept { return state_.done; }
  const EvolveState& state() const noexcept { return state_; }
  const EvolveConfig& config() const noexcept { return config_; }
  std::size_t planned_iterations() const noexcept { return planned_; }
  const Catalog& corpus() const noexcept { return *corpus_; }

 private:
  struct Pending {
    std::vector<Offspring> offspring;
    std::vector<std::string> parents;
    double eta = 0.0;
  };

  void draw_seeds() {
    const std::size_t n = config_.effective_seed_count();
    std::vector<std::size_t> order(corpus_->size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + state_.rng.index(order.size() - i)]);
    pending_items_.clear();
    for (std::size_t i = 0; i < n; ++i) pending_items_.push_back((*corpus_)[order[i]]);
    pending_ = Pending{};
  }

  EvolveRecord commit_seeds(std::span<const double> rewards) {
    state_.catalog = Catalog(pending_items_);
    const auto n = static_cast<Eigen::Index>(state_.catalog.size());
    state_.scores = ScoreTable::Constant(n, 1.0 / static_cast<double>(n));
    for (const auto& item : pending_items_) state_.used.insert(item.id);

    Eigen::MatrixXd z(n, state_.catalog.dim());
    for (Eigen::Index i = 0; i < n; ++i) z.row(i) = state_.catalog[static_cast<std::size_t>(i)].embedding.transpose();
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = scale_reward(rewards[static_cast<std::size_t>(i)], config_.guidance.gamma);
    state_.gp = GPModel::fit(z, y, {config_.kernel_variance, median_heuristic(z)}, config_.ridge);

    std::vector<std::size_t> batch(static_cast<std::size_t>(n));
    std::iota(batch.begin(), batch.end(), 0);
    EvolveRecord rec;
    rec.iteration = 0;
    apply_updates(batch, rewards, rec);
    state_.seeded = true;
    state_.done = planned_ == 0;
    return finish(rec);
  }

  void breed() {
    Pending p;
    const std::size_t t = state_.t;
    p.eta = config_.use_guidance ? eta_schedule(config_.guidance, t, planned_ > 1 ? planned_ - 1 : 0) : 0.0;

    const std::size_t np = std::min(config_.parent_pool, state_.catalog.size());
    std::vector<double> logw(static_cast<std::size_t>(state_.scores.size()));
    for (std::size_t j = 0; j < logw.size(); ++j) logw[j] = state_.scores[static_cast<Eigen::Index>(j)] / config_.temperature;
    const std::vector<std::size_t> parents = roulette_sample_log(logw, np, state_.rng);
    for (std::size_t i : parents) p.parents.push_back(state_.catalog[i].id);

    std::size_t count = config_.offspring;
    if (config_.budget) count = std::min(count, *config_.budget - std::min(*config_.budget, state_.queries));
    pending_items_.clear();
    pending_failures_.clear();
    for (std::size_t o = 0; o < count; ++o) {
      std::vector<double> plog(parents.size());
      for (std::size_t k = 0; k < parents.size(); ++k)
        plog[k] = state_.scores[static_cast<Eigen::Index>(parents[k])] / config_.temperature;
      const auto pair = roulette_sample_log(plog, 2, state_.rng);
      Offspring off;
      off.parent_a = parents[pair[0]];
      off.parent_b = parents[pair[1]];
      const Embedding& ea = state_.catalog[off.parent_a].embedding;
      const Embedding& eb = state_.catalog[off.parent_b].embedding;
      off.cut = static_cast<Eigen::Index>(state_.rng.index(static_cast<std::size_t>(ea.size()) + 1));
      Embedding e = crossover_at(ea, eb, off.cut);
      if (config_.mutation_scale > 0.0) {
        off.delta = state_.rng.uniform(-config_.mutation_scale, config_.mutation_scale);
        e *= 1.0 + off.delta;
      }
      std::string id = "gen-" + std::to_string(t + 1) + "-" + std::to_string(o);
      while (state_.catalog.contains(id) || corpus_->contains(id)) id += "'";
      try {
        if (p.eta != 0.0) e = pseudo_target(e, state_.gp, p.eta, config_.guidance.direction);
        Generated g = generator_(e);
        require(g.embedding.size() == state_.catalog.dim() && g.embedding.allFinite() && g.embedding.norm() > 0.0,
                ErrorCode::evaluation_failed, "generator returned an invalid embedding");
        off.item = Item{id, std::move(g.embedding), std::move(g.payload)};
        off.source_id = std::move(g.source_id);
      } catch (const std::exception& ex) {
        pending_failures_.push_back(id + ": " + ex.what());
        continue;
      }
      pending_items_.push_back(off.item);
      p.offspring.push_back(std::move(off));
    }
    pending_ = std::move(p);
  }

  EvolveRecord commit_offspring(std::span<const double> rewards) {
    Pending& p = *pending_;
    EvolveRecord rec;
    rec.iteration = state_.t + 1;
    rec.parents = p.parents;
    rec.eta = p.eta;
    rec.failures = pending_failures_;

    const std::size_t first_new = state_.catalog.size();
    for (std::size_t o = 0; o < p.offspring.size(); ++o) {
      state_.catalog.append(p.offspring[o].item);
      if (p.offspring[o].source_id) state_.used.insert(*p.offspring[o].source_id);
    }
    for (auto& item : novelty_inject(*corpus_, state_.used, config_.novelty, state_.rng)) {
      rec.novelty.push_back(item.id);
      state_.used.insert(item.id);
      state_.catalog.append(std::move(item));
    }
    const auto n_now = static_cast<Eigen::Index>(state_.catalog.size());
    const auto n_old = state_.scores.size();
    state_.scores.conservativeResize(n_now);
    state_.scores.tail(n_now - n_old).setConstant(1.0 / static_cast<double>(n_now));

    std::vector<std::size_t> batch;
    Eigen::MatrixXd z(static_cast<Eigen::Index>(p.offspring.size()), state_.catalog.dim());
    Eigen::VectorXd y(z.rows());
    for (std::size_t o = 0; o < p.offspring.size(); ++o) {
      batch.push_back(first_new + o);
      z.row(static_cast<Eigen::Index>(o)) = p.offspring[o].item.embedding.transpose();
      y[static_cast<Eigen::Index>(o)] = scale_reward(rewards[o], config_.guidance.gamma);
    }
    state_.gp.append(z, y);
    if (config_.refit_lengthscale && !batch.empty()) refit_gp();
    apply_updates(batch, rewards, rec);
    for (const auto& off : p.offspring) rec.sources.push_back(off.source_id);

    state_.t += 1;
    state_.done = state_.t >= planned_;
    return finish(rec);
  }

  void refit_gp() {
    const GPModel& g = state_.gp;
    state_.gp = GPModel::fit(g.inputs(), g.targets(), {config_.kernel_variance, median_heuristic(g.inputs())}, config_.ridge);
  }

  /// Eq. 1-3 over the current catalog for the evaluated `batch` (catalog indices).
  void apply_updates(const std::vector<std::size_t>& batch, std::span<const double> rewards, EvolveRecord& rec) {
    if (!batch.empty()) {
      const auto best_set = select_top_k(batch, rewards, config_.top_k);
      std::vector<std::pair<std::size_t, double>> pairs;
      for (std::size_t b = 0; b < batch.size(); ++b) pairs.emplace_back(batch[b], rewards[b]);
      const ScoreTable prime = direct_reward_update(state_.scores, pairs, best_set, config_.alpha);
      state_.scores = spreading_update(prime, state_.catalog, best_set, config_.beta);
      for (std::size_t i : best_set) rec.best_set.push_back(state_.catalog[i].id);
    }
    state_.probs = softmax(state_.scores, config_.temperature);
    const std::size_t round = state_.seeded ? state_.t + 1 : 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Item& item = state_.catalog[batch[b]];
      rec.ids.push_back(item.id);
      rec.rewards.push_back(rewards[b]);
      state_.history.push_back({round, batch[b], item.id, rewards[b]});
      if (!state_.best || rewards[b] > state_.best->reward) state_.best = BestItem{item.id, batch[b], rewards[b]};
    }
    state_.queries += batch.size();
  }

  EvolveRecord finish(EvolveRecord& rec) {
    rec.catalog_size = state_.catalog.size();
    rec.gp_size = static_cast<std::size_t>(state_.gp.size());
    rec.lengthscale = state_.gp.kernel().lengthscale;
    if (state_.best) rec.best = *state_.best;
    rec.queries = state_.queries;
    return rec;
  }

  std::shared_ptr<const Catalog> corpus_;
  EvolveConfig config_;
  Generator generator_;
  EvolveState state_;
  std::size_t planned_ = 0;
  std::optional<Pending> pending_;
  std::vector<Item> pending_items_;
  std::vector<std::string> pending_failures_;
};

struct EvolveTrace {
  EvolveRecord seed_round;
  std::vector<EvolveRecord> steps;
  EvolveState final_state;
  /// Every evaluated item in evaluation order (seed round first).
  std::vector<Item> evaluated;
};

inline EvolveTrace run_evolve(std::shared_ptr<const Catalog> corpus, const EvolveConfig& config, const RewardFn& reward_fn,
                              const Generator& generator, std::uint64_t seed) {
  EvolveEngine engine(std::move(corpus), config, generator, seed);
  EvolveTrace trace;
  bool first = true;
  while (!engine.done()) {
    const auto items = engine.propose();
    trace.evaluated.insert(trace.evaluated.end(), items.begin(), items.end());
    EvolveRecord rec = engine.step(reward_fn);
    if (first) {
      trace.seed_round = std::move(rec);
      first = false;
    } else {
      trace.steps.push_back(std::move(rec));
    }
  }
  trace.final_state = engine.state();
  return trace;
}

}  // namespace mindpilot

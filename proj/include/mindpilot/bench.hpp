#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <atomic>
#include <chrono>
#include <exception>
#include <thread>
#include <type_traits>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mindpilot/baselines.hpp"
#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/core/rng.hpp"
#include "mindpilot/evolve.hpp"
#include "mindpilot/features.hpp"
#include "mindpilot/io.hpp"
#include "mindpilot/oracle.hpp"
#include "mindpilot/search.hpp"
#include "mindpilot/stats.hpp"

namespace mindpilot::bench {

// Per-seed random streams. Each concern draws from its own stream so changing
// one part of an experiment does not shift the others.
namespace stream {
inline constexpr std::uint64_t catalog = 0x636174;
inline constexpr std::uint64_t target = 0x746774;
inline constexpr std::uint64_t control = 0x726e64;
inline constexpr std::uint64_t noise = 0x6e6f69;
inline constexpr std::uint64_t rater = 0x726174;
inline constexpr std::uint64_t baseline = 0x626173;
inline constexpr std::uint64_t corpus = 0x636f72;
}  // namespace stream

// ---------------------------------------------------------------------------
// Synthetic catalogs

/// Clustered stimulus set: `clusters` centers in a low-rank subspace plus
/// isotropic jitter, each with `per_cluster` perturbed members. All vectors are
/// unit-normalized.
struct ClusterCatalogConfig {
  std::size_t clusters = 50;
  std::size_t per_cluster = 12;
  Eigen::Index dim = 64;
  Eigen::Index latent_dim = 4;
  /// Off-subspace jitter of centers; larger values separate clusters more.
  double center_noise = 0.3;
  /// Member spread around the center.
  double within = 0.35;

  void validate() const {
    require(clusters >= 1 && per_cluster >= 1 && clusters * per_cluster >= 2, ErrorCode::invalid_argument,
            "synthetic catalog needs at least 2 items");
    require(dim >= 2 && latent_dim >= 1 && latent_dim <= dim, ErrorCode::invalid_argument,
            "synthetic catalog needs 1 <= latent_dim <= dim");
    require(center_noise >= 0.0 && within >= 0.0, ErrorCode::invalid_argument, "catalog noise levels must be >= 0");
  }
};

inline void to_json(Json& j, const ClusterCatalogConfig& c) {
  j = Json{{"clusters", c.clusters},     {"per_cluster", c.per_cluster}, {"dim", c.dim},
           {"latent_dim", c.latent_dim}, {"center_noise", c.center_noise}, {"within", c.within}};
}

inline void from_json(const Json& j, ClusterCatalogConfig& c) {
  read_optional(j, "clusters", c.clusters);
  read_optional(j, "per_cluster", c.per_cluster);
  read_optional(j, "dim", c.dim);
  read_optional(j, "latent_dim", c.latent_dim);
  read_optional(j, "center_noise", c.center_noise);
  read_optional(j, "within", c.within);
}

struct SyntheticCatalog {
  Catalog catalog;
  std::vector<std::size_t> cluster;
};

inline Embedding gaussian_vector(Eigen::Index n, Rng& rng) {
  Embedding v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline Embedding random_unit(Eigen::Index n, Rng& rng) {
  Embedding v = gaussian_vector(n, rng);
  return v / v.norm();
}

inline SyntheticCatalog make_cluster_catalog(const ClusterCatalogConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Index f = cfg.dim, k = cfg.latent_dim;
  Eigen::MatrixXd g(f, k);
  for (Eigen::Index c = 0; c < k; ++c) g.col(c) = gaussian_vector(f, rng);
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(f, k);
  const double jitter = cfg.center_noise * std::sqrt(static_cast<double>(k) / static_cast<double>(f));
  const double spread = cfg.within / std::sqrt(static_cast<double>(f));

  SyntheticCatalog out;
  std::vector<Item> items;
  items.reserve(cfg.clusters * cfg.per_cluster);
  for (std::size_t c = 0; c < cfg.clusters; ++c) {
    Embedding center = basis * gaussian_vector(k, rng) + jitter * gaussian_vector(f, rng);
    center.normalize();
    for (std::size_t m = 0; m < cfg.per_cluster; ++m) {
      Embedding e = center + spread * gaussian_vector(f, rng);
      e.normalize();
      items.push_back({"c" + std::to_string(c) + "-m" + std::to_string(m), std::move(e), std::nullopt});
      out.cluster.push_back(c);
    }
  }
  out.catalog = Catalog(std::move(items));
  return out;
}

inline Catalog make_random_corpus(std::size_t size, Eigen::Index dim, Rng& rng, const std::string& prefix = "u") {
  std::vector<Item> items;
  for (std::size_t i = 0; i < size; ++i) items.push_back({prefix + std::to_string(i), random_unit(dim, rng), std::nullopt});
  return Catalog(std::move(items));
}

// ---------------------------------------------------------------------------
// Experiment specification

enum class Scenario { retrieval, generation, grid, efficiency, rating_sim };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::retrieval: return "retrieval";
    case Scenario::generation: return "generation";
    case Scenario::grid: return "grid";
    case Scenario::efficiency: return "efficiency";
    case Scenario::rating_sim: return "rating-sim";
  }
  return "unknown";
}

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "retrieval") return Scenario::retrieval;
  if (s == "generation" || s == "generate") return Scenario::generation;
  if (s == "grid") return Scenario::grid;
  if (s == "efficiency") return Scenario::efficiency;
  if (s == "rating-sim" || s == "rate-sim") return Scenario::rating_sim;
  fail(ErrorCode::invalid_argument, "unknown scenario '" + s + "'");
}

enum class RaterTarget {
  /// Hidden target is a catalog member (mental-match analog).
  item,
  /// Hidden target is a random axis in the catalog span (emotion analog).
  direction,
};

struct ExperimentSpec {
  Scenario scenario = Scenario::retrieval;
  std::vector<std::uint64_t> seeds;
  ClusterCatalogConfig catalog;
  OracleConfig oracle;
  FeatureKind target_kind = FeatureKind::semantic;
  /// When set, oracle noise is calibrated to this cross-modal correlation.
  std::optional<double> calibrate_r;
  std::size_t calibration_probes = 96;
  SearchConfig search;
  EvolveConfig evolve;
  BaselineConfig baselines;
  std::size_t corpus_size = 200;
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<std::size_t> budgets;
  RaterTarget rater_target = RaterTarget::direction;
  double rater_noise = 0.05;
  RatingLink rater_link{0.5, 0.5};
  std::string out_dir;
  /// Worker threads for per-seed runs; 0 = hardware concurrency. Efficiency
  /// timings always run on one thread.
  std::size_t threads = 0;

  void validate() const {
    require(!seeds.empty(), ErrorCode::invalid_argument, "experiment needs at least one seed");
    catalog.validate();
    require(oracle.embedding_dim == catalog.dim, ErrorCode::invalid_argument,
            "oracle.embedding_dim must equal catalog.dim");
    oracle.validate();
    require(target_kind != FeatureKind::rating, ErrorCode::invalid_argument,
            "bench targets are semantic or psd; rating rewards come from the rater");
    require(!calibrate_r || (*calibrate_r > -1.0 && *calibrate_r < 1.0), ErrorCode::invalid_argument,
            "calibrate_r must lie in (-1, 1)");
    switch (scenario) {
      case Scenario::retrieval:
      case Scenario::rating_sim:
        search.validate(catalog.clusters * catalog.per_cluster);
        break;
      case Scenario::grid:
        search.validate(catalog.clusters * catalog.per_cluster);
        require(!alphas.empty() && !betas.empty(), ErrorCode::invalid_argument, "grid needs alphas and betas");
        for (double a : alphas) require(a > 0.0 && a <= 1.0, ErrorCode::invalid_argument, "grid alpha outside (0, 1]");
        for (double b : betas) require(b >= 0.0 && b <= 1.0, ErrorCode::invalid_argument, "grid beta outside [0, 1]");
        break;
      case Scenario::generation:
        evolve.validate();
        require(corpus_size >= evolve.seed_count, ErrorCode::invalid_argument, "corpus_size must be >= evolve.seed_count");
        break;
      case Scenario::efficiency:
        evolve.validate();
        baselines.validate();
        require(!budgets.empty(), ErrorCode::invalid_argument, "efficiency needs at least one budget");
        for (auto b : budgets) require(b >= 2, ErrorCode::invalid_argument, "budgets must be >= 2");
        break;
    }
  }
};

/// Desk-scale defaults per scenario.
inline ExperimentSpec default_spec(Scenario scenario) {
  ExperimentSpec s;
  s.scenario = scenario;
  for (std::uint64_t i = 0; i < 20; ++i) s.seeds.push_back(i);
  s.oracle.embedding_dim = s.catalog.dim;
  s.oracle.hidden = 2 * s.catalog.dim;
  s.oracle.seed = 7;
  s.search.top_k = 1;
  s.search.temperature = 1e-5;
  s.evolve.temperature = 0.01;
  s.evolve.budget = 200;
  s.alphas = {0.1, 0.3, 0.5, 0.7, 0.9};
  s.betas = {0.1, 0.3, 0.5, 0.7, 0.9};
  s.budgets = {5, 10, 50, 200};
  if (scenario == Scenario::generation) s.evolve.budget.reset(), s.evolve.max_iterations = 10;
  return s;
}

inline void to_json(Json& j, const ExperimentSpec& s) {
  j = Json{{"scenario", to_string(s.scenario)},
           {"seeds", s.seeds},
           {"catalog", s.catalog},
           {"oracle", s.oracle},
           {"target_kind", to_string(s.target_kind)},
           {"calibrate_r", s.calibrate_r ? Json(*s.calibrate_r) : Json(nullptr)},
           {"calibration_probes", s.calibration_probes},
           {"search", s.search},
           {"evolve", s.evolve},
           {"baselines", s.baselines},
           {"corpus_size", s.corpus_size},
           {"alphas", s.alphas},
           {"betas", s.betas},
           {"budgets", s.budgets},
           {"rater", {{"target", s.rater_target == RaterTarget::item ? "item" : "direction"},
                      {"noise_std", s.rater_noise},
                      {"link", {{"offset", s.rater_link.offset}, {"scale", s.rater_link.scale}}}}},
           {"out_dir", s.out_dir},
           {"threads", s.threads}};
}

/// Overlays `j` onto the defaults of its scenario (or of `fallback`).
inline ExperimentSpec spec_from_json(const Json& j, Scenario fallback = Scenario::retrieval) {
  const Scenario sc = j.contains("scenario") ? scenario_from_string(j.at("scenario").get<std::string>()) : fallback;
  ExperimentSpec s = default_spec(sc);
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("catalog")) j.at("catalog").get_to(s.catalog);
  s.oracle.embedding_dim = s.catalog.dim;
  s.oracle.hidden = 2 * s.catalog.dim;
  if (j.contains("oracle")) j.at("oracle").get_to(s.oracle);
  if (j.contains("target_kind")) s.target_kind = feature_kind_from_string(j.at("target_kind").get<std::string>());
  if (auto it = j.find("calibrate_r"); it != j.end())
    s.calibrate_r = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
  read_optional(j, "calibration_probes", s.calibration_probes);
  if (j.contains("search")) j.at("search").get_to(s.search);
  if (j.contains("evolve")) j.at("evolve").get_to(s.evolve);
  if (j.contains("baselines")) j.at("baselines").get_to(s.baselines);
  read_optional(j, "corpus_size", s.corpus_size);
  if (j.contains("alphas")) s.alphas = j.at("alphas").get<std::vector<double>>();
  if (j.contains("betas")) s.betas = j.at("betas").get<std::vector<double>>();
  if (j.contains("budgets")) s.budgets = j.at("budgets").get<std::vector<std::size_t>>();
  if (auto it = j.find("rater"); it != j.end()) {
    if (it->contains("target")) {
      const auto t = it->at("target").get<std::string>();
      require(t == "item" || t == "direction", ErrorCode::invalid_argument, "rater.target must be item or direction");
      s.rater_target = t == "item" ? RaterTarget::item : RaterTarget::direction;
    }
    read_optional(*it, "noise_std", s.rater_noise);
    if (it->contains("link")) {
      read_optional(it->at("link"), "offset", s.rater_link.offset);
      read_optional(it->at("link"), "scale", s.rater_link.scale);
    }
  }
  read_optional(j, "out_dir", s.out_dir);
  read_optional(j, "threads", s.threads);
  return s;
}

/// "0,3,7", "0-19" and "0-4,10" forms.
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string part = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (part.empty()) continue;
    try {
      const std::size_t dash = part.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
        require(lo <= hi, ErrorCode::invalid_argument, "seed range '" + part + "' is descending");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      fail(ErrorCode::invalid_argument, "bad seed list entry '" + part + "'");
    }
  }
  require(!out.empty(), ErrorCode::invalid_argument, "seed list is empty");
  return out;
}

/// Runs fn(seed) for every seed on up to `threads` workers; results keep seed order.
template <class Fn>
auto map_seeds(const std::vector<std::uint64_t>& seeds, std::size_t threads, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, std::uint64_t>;
  std::vector<std::optional<R>> slots(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
      try {
        slots[i].emplace(fn(seeds[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(seeds.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Shared oracle pipeline

struct OracleContext {
  BrainOracle oracle;
  SemanticDecoder decoder;
  FeatureEncoder encoder;
  /// Correlation achieved by calibration, when it ran.
  std::optional<double> calibrated_r;

  /// Feature of the noise-free response.
  FeatureVector clean_feature(const Embedding& e, FeatureKind kind) const {
    return encoder.encode(oracle.forward_noiseless(e), kind);
  }
};

inline OracleContext make_context(const ExperimentSpec& spec) {
  BrainOracle oracle = make_oracle(spec.oracle);
  SemanticDecoder decoder = SemanticDecoder::from_oracle(oracle);
  FeatureEncoder encoder{decoder, BandSpec::defaults()};
  return OracleContext{std::move(oracle), std::move(decoder), std::move(encoder), std::nullopt};
}

/// Sets the oracle noise so the cross-modal correlation over `probes` hits `target_r`.
inline void calibrate(OracleContext& ctx, std::span<const Item> probes, const Item& reference, double target_r,
                      std::uint64_t seed) {
  ctx.oracle = calibrate_oracle(ctx.oracle, ctx.decoder, probes, reference, target_r, seed);
  ctx.calibrated_r = cross_modal_correlation(ctx.oracle, ctx.decoder, probes, reference, Rng(seed, 0xca1b));
}

/// Noise-free reward against a fixed target feature, memoized by item id.
class CleanScorer {
 public:
  CleanScorer(const OracleContext& ctx, FeatureVector target) : ctx_(&ctx), target_(std::move(target)) {}

  double operator()(const Item& item) {
    if (auto it = cache_.find(item.id); it != cache_.end()) return it->second;
    const double s = cosine_sim(ctx_->clean_feature(item.embedding, target_.kind).values, target_.values);
    cache_.emplace(item.id, s);
    return s;
  }

  const FeatureVector& target() const noexcept { return target_; }

 private:
  const OracleContext* ctx_;
  FeatureVector target_;
  std::unordered_map<std::string, double> cache_;
};

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  double ss = 0.0;
  double is = 0.0;
  double l1 = 0.0;
};

/// SS, IS and the feature L1 error of `achieved` against `target_item`.
inline Metrics compute_metrics(const Item& achieved, const Item& target_item, const OracleContext& ctx, const Target& target) {
  require(target.kind != FeatureKind::rating && target.feature, ErrorCode::invalid_argument,
          "compute_metrics: target has no feature vector");
  const FeatureVector f = ctx.clean_feature(achieved.embedding, target.kind);
  require(f.kind == target.feature->kind && f.values.size() == target.feature->values.size(), ErrorCode::invalid_argument,
          "compute_metrics: feature kind mismatch");
  Metrics m;
  m.ss = score_ss(achieved, target_item, ctx.oracle, ctx.decoder);
  m.is = score_is(achieved, target_item, ctx.oracle);
  m.l1 = (f.values - target.feature->values).cwiseAbs().mean();
  return m;
}

struct TraceMetrics {
  Metrics best;
  /// 1-based round whose item achieved the best observed reward (0 = seed round).
  std::size_t best_step = 0;
};

inline TraceMetrics compute_metrics(const EvolveTrace& trace, const Item& target_item, const OracleContext& ctx,
                                    const Target& target) {
  const BestItem& b = *trace.final_state.best;
  TraceMetrics out;
  out.best = compute_metrics(trace.final_state.catalog[b.index], target_item, ctx, target);
  for (const auto& h : trace.final_state.history)
    if (h.id == b.id) out.best_step = h.iteration;
  return out;
}

inline TraceMetrics compute_metrics(const SearchTrace& trace, const Catalog& catalog, const Item& target_item,
                                    const OracleContext& ctx, const Target& target) {
  const BestItem& b = *trace.final_state.best;
  TraceMetrics out;
  out.best = compute_metrics(catalog[b.index], target_item, ctx, target);
  for (const auto& h : trace.final_state.history)
    if (h.index == b.index) {
      out.best_step = h.iteration;
      break;
    }
  return out;
}

inline std::string mean_pm_std(std::span<const double> v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f±%.*f", precision, stats::mean(v), precision, stats::stddev(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Retrieval (interactive search over a fixed catalog)

struct RetrievalSeed {
  std::uint64_t seed = 0;
  std::size_t target = 0;
  std::size_t target_cluster = 0;
  SearchTrace trace;
  /// Noise-free similarity of each round's highest-reward item.
  std::vector<double> step_similarity;
  std::vector<double> step_reward;
  std::vector<bool> step_in_cluster;
  /// Mean noise-free similarity of a uniformly random batch.
  double random_similarity = 0.0;
  /// Best noise-free similarity among batch_size * rounds random items.
  double random_budget_best = 0.0;
  std::size_t argmax = 0;
  bool cluster_hit = false;
  bool exact_hit = false;

  double step1() const { return step_similarity.front(); }
  double step_best() const { return *std::max_element(step_similarity.begin(), step_similarity.end()); }
};

struct RetrievalReport {
  Json spec;
  std::vector<RetrievalSeed> seeds;
  std::optional<double> noise_std;
  std::optional<double> calibrated_r;

  std::vector<double> column(double (RetrievalSeed::*f)() const) const {
    std::vector<double> v;
    for (const auto& s : seeds) v.push_back((s.*f)());
    return v;
  }
  std::vector<double> random() const {
    std::vector<double> v;
    for (const auto& s : seeds) v.push_back(s.random_similarity);
    return v;
  }
  double cluster_hit_rate() const {
    double h = 0;
    for (const auto& s : seeds) h += s.cluster_hit;
    return h / static_cast<double>(seeds.size());
  }
  /// One-sided paired p-value of step-best > random control.
  double p_value() const { return stats::paired_t_test_greater(column(&RetrievalSeed::step_best), random()); }
};

/// One search run over a prepared catalog; all randomness derives from `seed`.
inline RetrievalSeed run_retrieval_seed(const SyntheticCatalog& data, const OracleContext& ctx, const ExperimentSpec& spec,
                                        const SearchConfig& search, std::uint64_t seed) {
  const Catalog& catalog = data.catalog;
  RetrievalSeed r;
  r.seed = seed;
  Rng target_rng(seed, stream::target);
  r.target = target_rng.index(catalog.size());
  r.target_cluster = data.cluster[r.target];
  const Target target = target_from_item(catalog[r.target], ctx.oracle, ctx.encoder, spec.target_kind);
  CleanScorer clean(ctx, *target.feature);

  const RewardFn reward_fn = make_reward_fn(ctx.oracle.as_function(), ctx.encoder, target, Rng(seed, stream::noise));
  r.trace = run_search(catalog, search, reward_fn, seed);
  for (const auto& step : r.trace.steps) {
    r.step_similarity.push_back(clean(catalog[step.round_best()]));
    r.step_reward.push_back(step.round_best_reward());
    r.step_in_cluster.push_back(data.cluster[step.round_best()] == r.target_cluster);
  }

  Rng control(seed, stream::control);
  std::vector<double> uniform(catalog.size(), 0.0);
  const auto batch = roulette_sample_log(uniform, search.batch_size, control);
  double acc = 0.0;
  for (std::size_t i : batch) acc += clean(catalog[i]);
  r.random_similarity = acc / static_cast<double>(batch.size());
  const std::size_t budget = std::min(catalog.size(), search.batch_size * r.trace.steps.size());
  r.random_budget_best = -1.0;
  for (std::size_t i : roulette_sample_log(uniform, budget, control))
    r.random_budget_best = std::max(r.random_budget_best, clean(catalog[i]));

  r.argmax = r.trace.argmax_score();
  r.cluster_hit = data.cluster[r.argmax] == r.target_cluster;
  r.exact_hit = r.argmax == r.target;
  return r;
}

/// Calibrates the shared context against the first seed's catalog and target.
inline void maybe_calibrate(OracleContext& ctx, const ExperimentSpec& spec) {
  if (!spec.calibrate_r) return;
  Rng rng(spec.seeds.front(), stream::catalog);
  const SyntheticCatalog data = make_cluster_catalog(spec.catalog, rng);
  Rng target_rng(spec.seeds.front(), stream::target);
  const std::size_t ref = target_rng.index(data.catalog.size());
  Rng pick(spec.seeds.front(), stream::control ^ 0xca1b);
  std::vector<double> uniform(data.catalog.size(), 0.0);
  std::vector<Item> probes;
  for (std::size_t i : roulette_sample_log(uniform, std::min(spec.calibration_probes, data.catalog.size()), pick))
    probes.push_back(data.catalog[i]);
  calibrate(ctx, probes, data.catalog[ref], *spec.calibrate_r, spec.seeds.front());
}

inline RetrievalReport run_retrieval_experiment(const ExperimentSpec& spec) {
  spec.validate();
  OracleContext ctx = make_context(spec);
  maybe_calibrate(ctx, spec);
  RetrievalReport report;
  report.spec = spec;
  if (ctx.calibrated_r) {
    report.noise_std = ctx.oracle.config().noise_std;
    report.calibrated_r = ctx.calibrated_r;
  }
  report.seeds = map_seeds(spec.seeds, spec.threads, [&](std::uint64_t seed) {
    Rng rng(seed, stream::catalog);
    return run_retrieval_seed(make_cluster_catalog(spec.catalog, rng), ctx, spec, spec.search, seed);
  });
  return report;
}

inline io::CsvTable retrieval_table(const RetrievalReport& report) {
  io::CsvTable t({"seed", "iteration", "round_best_id", "round_best_reward", "round_best_similarity",
                  "best_so_far_similarity", "random_similarity", "random_budget_best", "target_cluster",
                  "round_best_in_cluster"});
  for (const auto& s : report.seeds) {
    double best = -2.0;
    for (std::size_t k = 0; k < s.trace.steps.size(); ++k) {
      const auto& step = s.trace.steps[k];
      best = std::max(best, s.step_similarity[k]);
      const auto pos = std::find(step.batch.begin(), step.batch.end(), step.round_best()) - step.batch.begin();
      t.add({std::to_string(s.seed), std::to_string(step.iteration), step.ids[static_cast<std::size_t>(pos)],
             io::format_double(s.step_reward[k]), io::format_double(s.step_similarity[k]), io::format_double(best),
             io::format_double(s.random_similarity), io::format_double(s.random_budget_best),
             std::to_string(s.target_cluster), s.step_in_cluster[k] ? "1" : "0"});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Grid over alpha x beta

struct GridReport {
  Json spec;
  std::vector<double> alphas;
  std::vector<double> betas;
  /// cells[a][b][seed] = step-best similarity.
  std::vector<std::vector<std::vector<double>>> cells;

  io::CsvTable matrix() const {
    std::vector<std::string> header{"alpha\\beta"};
    for (double b : betas) header.push_back(io::format_double(b));
    io::CsvTable t(header);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      std::vector<std::string> row{io::format_double(alphas[a])};
      for (std::size_t b = 0; b < betas.size(); ++b) row.push_back(mean_pm_std(cells[a][b]));
      t.add(row);
    }
    return t;
  }

  io::CsvTable long_table(const std::vector<std::uint64_t>& seeds) const {
    io::CsvTable t({"alpha", "beta", "seed", "step_best_similarity"});
    for (std::size_t a = 0; a < alphas.size(); ++a)
      for (std::size_t b = 0; b < betas.size(); ++b)
        for (std::size_t s = 0; s < seeds.size(); ++s)
          t.add({io::format_double(alphas[a]), io::format_double(betas[b]), std::to_string(seeds[s]),
                 io::format_double(cells[a][b][s])});
    return t;
  }
};

inline GridReport run_grid(const ExperimentSpec& spec) {
  spec.validate();
  OracleContext ctx = make_context(spec);
  maybe_calibrate(ctx, spec);
  GridReport g;
  g.spec = spec;
  g.alphas = spec.alphas;
  g.betas = spec.betas;
  g.cells.assign(spec.alphas.size(), std::vector<std::vector<double>>(spec.betas.size()));
  const auto per_seed = map_seeds(spec.seeds, spec.threads, [&](std::uint64_t seed) {
    Rng rng(seed, stream::catalog);
    const SyntheticCatalog data = make_cluster_catalog(spec.catalog, rng);
    std::vector<double> cells;
    for (double alpha : spec.alphas)
      for (double beta : spec.betas) {
        SearchConfig cfg = spec.search;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cells.push_back(run_retrieval_seed(data, ctx, spec, cfg, seed).step_best());
      }
    return cells;
  });
  for (const auto& cells : per_seed)
    for (std::size_t a = 0; a < spec.alphas.size(); ++a)
      for (std::size_t b = 0; b < spec.betas.size(); ++b) g.cells[a][b].push_back(cells[a * spec.betas.size() + b]);
  return g;
}

// ---------------------------------------------------------------------------
// Generation (heuristic generation against the oracle pipeline)

struct GenerationSeed {
  std::uint64_t seed = 0;
  Item target_item;
  EvolveTrace trace;
  /// Metrics of each round's highest-reward offspring; index 0 is the seed round.
  std::vector<Metrics> step;
  std::vector<double> step_reward;
  Metrics random;
  TraceMetrics best;
};

struct GenerationReport {
  Json spec;
  std::vector<GenerationSeed> seeds;
  std::optional<double> noise_std;
};

inline GenerationSeed run_generation_seed(const OracleContext& ctx, const ExperimentSpec& spec, std::uint64_t seed) {
  GenerationSeed g;
  g.seed = seed;
  Rng trng(seed, stream::target);
  g.target_item = Item{"target", random_unit(spec.catalog.dim, trng), std::nullopt};
  Rng crng(seed, stream::corpus);
  auto corpus = std::make_shared<const Catalog>(make_random_corpus(spec.corpus_size, spec.catalog.dim, crng));
  const Target target = target_from_item(g.target_item, ctx.oracle, ctx.encoder, spec.target_kind);
  const RewardFn reward_fn = make_reward_fn(ctx.oracle.as_function(), ctx.encoder, target, Rng(seed, stream::noise));
  g.trace = run_evolve(corpus, spec.evolve, reward_fn, Generator::identity(), seed);

  auto round_best = [&](const EvolveRecord& rec) {
    const auto it = std::max_element(rec.rewards.begin(), rec.rewards.end());
    const std::string& id = rec.ids[static_cast<std::size_t>(it - rec.rewards.begin())];
    g.step_reward.push_back(*it);
    g.step.push_back(compute_metrics(g.trace.final_state.catalog[*g.trace.final_state.catalog.index_of(id)], g.target_item,
                                     ctx, target));
  };
  round_best(g.trace.seed_round);
  for (const auto& rec : g.trace.steps)
    if (!rec.rewards.empty()) round_best(rec);

  // Random control: mean metrics of seed_count uniformly drawn corpus items.
  Rng control(seed, stream::control);
  std::vector<double> uniform(corpus->size(), 0.0);
  const auto pick = roulette_sample_log(uniform, spec.evolve.seed_count, control);
  for (std::size_t i : pick) {
    const Metrics m = compute_metrics((*corpus)[i], g.target_item, ctx, target);
    g.random.ss += m.ss / static_cast<double>(pick.size());
    g.random.is += m.is / static_cast<double>(pick.size());
    g.random.l1 += m.l1 / static_cast<double>(pick.size());
  }
  g.best = compute_metrics(g.trace, g.target_item, ctx, target);
  return g;
}

inline GenerationReport run_generation_experiment(const ExperimentSpec& spec) {
  spec.validate();
  OracleContext ctx = make_context(spec);
  maybe_calibrate(ctx, spec);
  GenerationReport r;
  r.spec = spec;
  if (ctx.calibrated_r) r.noise_std = ctx.oracle.config().noise_std;
  r.seeds = map_seeds(spec.seeds, spec.threads, [&](std::uint64_t seed) { return run_generation_seed(ctx, spec, seed); });
  return r;
}

// ---------------------------------------------------------------------------
// Efficiency (optimizer comparison at fixed query budgets)

struct EfficiencyRun {
  std::string method;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  double score = 0.0;
  double seconds = 0.0;
  std::size_t queries = 0;
};

struct EfficiencyReport {
  Json spec;
  std::vector<std::string> methods;
  std::vector<std::size_t> budgets;
  std::vector<EfficiencyRun> runs;
  std::optional<double> noise_std;

  std::vector<double> scores(const std::string& method, std::size_t budget) const {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r.method == method && r.budget == budget) v.push_back(r.score);
    return v;
  }
  std::vector<double> times(const std::string& method, std::size_t budget) const {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r.method == method && r.budget == budget) v.push_back(r.seconds);
    return v;
  }
  /// mean wall-clock(b_hi) / mean wall-clock(b_lo).
  double time_ratio(const std::string& method, std::size_t lo, std::size_t hi) const {
    return stats::mean(times(method, hi)) / stats::mean(times(method, lo));
  }

  io::CsvTable table() const {
    std::vector<std::string> header{"method"};
    for (auto b : budgets) {
      header.push_back("score@" + std::to_string(b));
      header.push_back("time_s@" + std::to_string(b));
    }
    io::CsvTable t(header);
    for (const auto& m : methods) {
      std::vector<std::string> row{m};
      for (auto b : budgets) {
        row.push_back(mean_pm_std(scores(m, b)));
        row.push_back(mean_pm_std(times(m, b), 6));
      }
      t.add(row);
    }
    return t;
  }

  io::CsvTable long_table() const {
    io::CsvTable t({"method", "budget", "seed", "score", "seconds", "queries"});
    for (const auto& r : runs)
      t.add({r.method, std::to_string(r.budget), std::to_string(r.seed), io::format_double(r.score),
             io::format_double(r.seconds), std::to_string(r.queries)});
    return t;
  }
};

inline const std::vector<std::string>& efficiency_methods() {
  static const std::vector<std::string> m{"mindpilot-offline", "mindpilot-closed-loop", "random", "bo", "cma-es"};
  return m;
}

/// Runs one optimizer on one seed. The objective is cosine similarity to a
/// hidden unit target in embedding space; the closed-loop variant only sees
/// rewards through the (possibly noisy) oracle pipeline but is scored on the
/// true objective of the item it judged best.
inline EfficiencyRun run_efficiency_once(const OracleContext& ctx, const ExperimentSpec& spec, const std::string& method,
                                         std::size_t budget, std::uint64_t seed) {
  const Eigen::Index dim = spec.catalog.dim;
  Rng trng(seed, stream::target);
  const Embedding target = random_unit(dim, trng);
  const RewardFn objective = [target](const Item& item) { return cosine_sim(item.embedding, target); };
  const DomainSampler sampler = unit_sphere_sampler(dim);
  EfficiencyRun run{method, budget, seed, 0.0, 0.0, 0};
  const auto t0 = std::chrono::steady_clock::now();

  if (method == "mindpilot-offline" || method == "mindpilot-closed-loop") {
    Rng crng(seed, stream::corpus);
    auto corpus = std::make_shared<const Catalog>(make_random_corpus(spec.corpus_size, dim, crng));
    EvolveConfig cfg = spec.evolve;
    cfg.budget = budget;
    RewardFn fn = objective;
    if (method == "mindpilot-closed-loop") {
      const Target t = target_from_item(Item{"target", target, std::nullopt}, ctx.oracle, ctx.encoder, spec.target_kind);
      fn = make_reward_fn(ctx.oracle.as_function(), ctx.encoder, t, Rng(seed, stream::noise));
    }
    BlackBox box(fn);
    run_evolve(corpus, cfg, box.as_reward_fn(), Generator::identity(), seed);
    run.queries = box.queries();
    run.score = cosine_sim(box.best_embedding(), target);
  } else {
    BlackBox box(objective);
    Rng rng(seed, stream::baseline);
    BaselineConfig cfg = spec.baselines;
    cfg.budget = budget;
    cfg.batch_size = std::min(cfg.batch_size, budget);
    if (method == "random") random_search(box, sampler, budget, rng);
    else if (method == "bo") run_bo(box, sampler, cfg, rng);
    else if (method == "cma-es") cmaes_run(box, dim, cfg, rng, sampler(rng));
    else fail(ErrorCode::invalid_argument, "unknown method '" + method + "'");
    run.queries = box.queries();
    run.score = box.best();
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  require(run.queries == budget, ErrorCode::evaluation_failed,
          method + " used " + std::to_string(run.queries) + " queries for budget " + std::to_string(budget));
  return run;
}

inline EfficiencyReport run_efficiency(const ExperimentSpec& spec,
                                       const std::vector<std::string>& methods = efficiency_methods()) {
  spec.validate();
  OracleContext ctx = make_context(spec);
  maybe_calibrate(ctx, spec);
  EfficiencyReport r;
  r.spec = spec;
  r.methods = methods;
  r.budgets = spec.budgets;
  if (ctx.calibrated_r) r.noise_std = ctx.oracle.config().noise_std;
  for (std::size_t b : spec.budgets)
    for (const auto& m : methods)
      for (std::uint64_t seed : spec.seeds) r.runs.push_back(run_efficiency_once(ctx, spec, m, b, seed));
  return r;
}

// ---------------------------------------------------------------------------
// Rating simulation (synthetic rater in place of a human)

struct RatingStep {
  std::size_t iteration = 0;
  std::vector<std::string> ids;
  std::vector<double> ratings;

  double mean() const { return stats::mean(ratings); }
};

struct RatingSeed {
  std::uint64_t seed = 0;
  std::vector<RatingStep> steps;
  BestItem best;
};

struct RatingReport {
  Json spec;
  std::vector<RatingSeed> seeds;

  /// Fraction of seeds whose mean rating at the final step exceeds step 1.
  double improved_fraction() const {
    double n = 0;
    for (const auto& s : seeds) n += s.steps.back().mean() > s.steps.front().mean();
    return n / static_cast<double>(seeds.size());
  }
};

inline RaterConfig make_rater(const ExperimentSpec& spec, const Catalog& catalog, std::uint64_t seed) {
  RaterConfig rc;
  Rng trng(seed, stream::target);
  if (spec.rater_target == RaterTarget::item) {
    rc.target = catalog[trng.index(catalog.size())].embedding;
  } else {
    // Random axis inside the span of the stimuli, so the rated attribute
    // actually varies across the catalog.
    Embedding axis = Embedding::Zero(catalog.dim());
    for (const auto& item : catalog.items()) axis += trng.normal() * item.embedding;
    rc.target = axis / axis.norm();
  }
  rc.noise_std = spec.rater_noise;
  rc.link = spec.rater_link;
  return rc;
}

/// Catalog used by rating runs for `seed` (also what a session service is given).
inline Catalog rating_catalog(const ExperimentSpec& spec, std::uint64_t seed) {
  Rng rng(seed, stream::catalog);
  return make_cluster_catalog(spec.catalog, rng).catalog;
}

/// Search driven purely by ratings. Ratings are drawn in batch order from the
/// rater stream; a service session fed the same ratings follows the same path.
inline RatingSeed run_rate_sim_seed(const Catalog& catalog, const SearchConfig& search, const RaterConfig& rater,
                                    std::uint64_t seed) {
  SearchEngine engine(catalog, search, seed);
  Rng rate_rng(seed, stream::rater);
  RatingSeed out;
  out.seed = seed;
  while (!engine.done()) {
    const auto batch = engine.propose();
    RatingStep step;
    for (std::size_t i : batch) {
      step.ids.push_back(catalog[i].id);
      step.ratings.push_back(synthetic_rate(catalog[i], rater, rate_rng));
    }
    step.iteration = engine.commit(step.ratings).iteration;
    out.steps.push_back(std::move(step));
  }
  out.best = *engine.state().best;
  return out;
}

inline RatingReport run_rate_sim(const ExperimentSpec& spec) {
  spec.validate();
  RatingReport r;
  r.spec = spec;
  r.seeds = map_seeds(spec.seeds, spec.threads, [&](std::uint64_t seed) {
    const Catalog catalog = rating_catalog(spec, seed);
    return run_rate_sim_seed(catalog, spec.search, make_rater(spec, catalog, seed), seed);
  });
  return r;
}

// ---------------------------------------------------------------------------
// Outputs: report.csv, trace.jsonl, spec.json and summary.json in out_dir.

struct Outputs {
  io::CsvTable report;
  std::vector<Json> trace;
  Json summary;
  /// Extra CSV files keyed by file name.
  std::vector<std::pair<std::string, io::CsvTable>> extra;
};

inline Json stats_json(std::span<const double> v) {
  return Json{{"mean", stats::mean(v)}, {"std", stats::stddev(v)}, {"n", v.size()}};
}

inline Json metrics_json(const Metrics& m) { return Json{{"ss", m.ss}, {"is", m.is}, {"l1", m.l1}}; }

inline Outputs retrieval_outputs(const RetrievalReport& r) {
  Outputs o{retrieval_table(r), {}, {}, {}};
  for (const auto& s : r.seeds)
    for (const auto& step : s.trace.steps) {
      Json j = step_to_json(step);
      j["seed"] = s.seed;
      o.trace.push_back(std::move(j));
    }
  const std::size_t rounds = r.seeds.front().step_similarity.size();
  Json per_step = Json::array();
  for (std::size_t k = 0; k < rounds; ++k) {
    std::vector<double> v;
    for (const auto& s : r.seeds)
      if (k < s.step_similarity.size()) v.push_back(s.step_similarity[k]);
    per_step.push_back(stats_json(v));
  }
  const auto step1 = r.column(&RetrievalSeed::step1), best = r.column(&RetrievalSeed::step_best), rnd = r.random();
  o.summary = Json{{"random", stats_json(rnd)},
                   {"step1", stats_json(step1)},
                   {"step_best", stats_json(best)},
                   {"per_step", std::move(per_step)},
                   {"p_value", r.p_value()},
                   {"cluster_hit_rate", r.cluster_hit_rate()}};
  if (r.noise_std) o.summary["oracle_noise_std"] = *r.noise_std;
  if (r.calibrated_r) o.summary["calibrated_r"] = *r.calibrated_r;
  return o;
}

inline Outputs grid_outputs(const GridReport& g, const std::vector<std::uint64_t>& seeds) {
  Outputs o{g.matrix(), {}, {}, {{"grid_long.csv", g.long_table(seeds)}}};
  Json cells = Json::array();
  for (std::size_t a = 0; a < g.alphas.size(); ++a)
    for (std::size_t b = 0; b < g.betas.size(); ++b) {
      Json j{{"alpha", g.alphas[a]}, {"beta", g.betas[b]}, {"step_best", g.cells[a][b]}};
      o.trace.push_back(j);
      cells.push_back(Json{{"alpha", g.alphas[a]}, {"beta", g.betas[b]}, {"step_best", stats_json(g.cells[a][b])}});
    }
  o.summary = Json{{"cells", std::move(cells)}};
  return o;
}

inline Outputs generation_outputs(const GenerationReport& r) {
  io::CsvTable t({"seed", "round", "round_best_reward", "ss", "is", "l1", "random_ss", "random_is", "random_l1"});
  std::vector<double> ss_best, l1_best, ss_rand, l1_rand, ss_first, best_step;
  Outputs o{t, {}, {}, {}};
  for (const auto& s : r.seeds) {
    for (std::size_t k = 0; k < s.step.size(); ++k)
      o.report.add({std::to_string(s.seed), std::to_string(k), io::format_double(s.step_reward[k]),
                    io::format_double(s.step[k].ss), io::format_double(s.step[k].is), io::format_double(s.step[k].l1),
                    io::format_double(s.random.ss), io::format_double(s.random.is), io::format_double(s.random.l1)});
    Json seed_round = evolve_record_to_json(s.trace.seed_round);
    seed_round["seed"] = s.seed;
    o.trace.push_back(std::move(seed_round));
    for (const auto& rec : s.trace.steps) {
      Json j = evolve_record_to_json(rec);
      j["seed"] = s.seed;
      o.trace.push_back(std::move(j));
    }
    ss_best.push_back(s.best.best.ss);
    l1_best.push_back(s.best.best.l1);
    ss_rand.push_back(s.random.ss);
    l1_rand.push_back(s.random.l1);
    ss_first.push_back(s.step.front().ss);
    best_step.push_back(static_cast<double>(s.best.best_step));
  }
  o.summary = Json{{"random", {{"ss", stats_json(ss_rand)}, {"l1", stats_json(l1_rand)}}},
                   {"step1", {{"ss", stats_json(ss_first)}}},
                   {"step_best", {{"ss", stats_json(ss_best)}, {"l1", stats_json(l1_best)}}},
                   {"best_step", stats_json(best_step)}};
  if (r.noise_std) o.summary["oracle_noise_std"] = *r.noise_std;
  return o;
}

inline Outputs efficiency_outputs(const EfficiencyReport& r) {
  Outputs o{r.table(), {}, {}, {{"efficiency_long.csv", r.long_table()}}};
  for (const auto& run : r.runs)
    o.trace.push_back(Json{{"method", run.method}, {"budget", run.budget}, {"seed", run.seed}, {"score", run.score},
                           {"seconds", run.seconds}, {"queries", run.queries}});
  Json methods = Json::object();
  for (const auto& m : r.methods) {
    Json per = Json::object();
    for (auto b : r.budgets)
      per[std::to_string(b)] = Json{{"score", stats_json(r.scores(m, b))}, {"seconds", stats_json(r.times(m, b))}};
    methods[m] = std::move(per);
  }
  o.summary = Json{{"methods", std::move(methods)}};
  if (r.budgets.size() >= 2) {
    Json ratios = Json::object();
    for (const auto& m : r.methods) ratios[m] = r.time_ratio(m, r.budgets.front(), r.budgets.back());
    o.summary["time_ratio"] = {{"lo", r.budgets.front()}, {"hi", r.budgets.back()}, {"ratio", std::move(ratios)}};
  }
  if (r.noise_std) o.summary["oracle_noise_std"] = *r.noise_std;
  return o;
}

inline Outputs rating_outputs(const RatingReport& r) {
  Outputs o{io::CsvTable({"seed", "iteration", "mean_rating", "ids", "ratings"}), {}, {}, {}};
  std::size_t rounds = 0;
  for (const auto& s : r.seeds) {
    rounds = std::max(rounds, s.steps.size());
    for (const auto& step : s.steps) {
      std::string ids, ratings;
      for (std::size_t i = 0; i < step.ids.size(); ++i) {
        ids += (i ? " " : "") + step.ids[i];
        ratings += (i ? " " : "") + io::format_double(step.ratings[i]);
      }
      o.report.add({std::to_string(s.seed), std::to_string(step.iteration), io::format_double(step.mean()), ids, ratings});
      o.trace.push_back(Json{{"seed", s.seed}, {"iteration", step.iteration}, {"ids", step.ids}, {"ratings", step.ratings}});
    }
  }
  Json per_step = Json::array();
  for (std::size_t k = 0; k < rounds; ++k) {
    std::vector<double> v;
    for (const auto& s : r.seeds)
      if (k < s.steps.size()) v.push_back(s.steps[k].mean());
    per_step.push_back(stats_json(v));
  }
  o.summary = Json{{"mean_rating_per_step", std::move(per_step)}, {"improved_fraction", r.improved_fraction()}};
  return o;
}

inline void write_outputs(const std::filesystem::path& dir, const ExperimentSpec& spec, const Outputs& o) {
  std::filesystem::create_directories(dir);
  o.report.save(dir / "report.csv");
  for (const auto& [name, table] : o.extra) table.save(dir / name);
  io::JsonlWriter trace(dir / "trace.jsonl", true);
  for (const auto& rec : o.trace) trace.write(rec);
  const Json spec_json = spec;
  io::write_json(dir / "spec.json", spec_json);
  Json summary = o.summary;
  summary["scenario"] = to_string(spec.scenario);
  summary["seeds"] = spec.seeds;
  summary["spec"] = spec_json;
  io::write_json(dir / "summary.json", summary);
}

/// Runs the scenario in `spec` and returns its outputs; writes them when out_dir is set.
inline Outputs run_scenario(const ExperimentSpec& spec) {
  Outputs o = [&] {
    switch (spec.scenario) {
      case Scenario::retrieval: return retrieval_outputs(run_retrieval_experiment(spec));
      case Scenario::grid: return grid_outputs(run_grid(spec), spec.seeds);
      case Scenario::generation: return generation_outputs(run_generation_experiment(spec));
      case Scenario::efficiency: return efficiency_outputs(run_efficiency(spec));
      case Scenario::rating_sim: return rating_outputs(run_rate_sim(spec));
    }
    fail(ErrorCode::invalid_argument, "unknown scenario");
  }();
  if (!spec.out_dir.empty()) write_outputs(spec.out_dir, spec, o);
  return o;
}

}  // namespace mindpilot::bench

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/core/rng.hpp"
#include "mindpilot/stats.hpp"
#include "mindpilot/surrogate.hpp"

namespace mindpilot {

/// Draws one point of the search domain.
using DomainSampler = std::function<Embedding(Rng&)>;

/// Uniform on the unit sphere in `dim` dimensions.
inline DomainSampler unit_sphere_sampler(Eigen::Index dim) {
  require(dim >= 1, ErrorCode::invalid_argument, "sampler dimension must be >= 1");
  return [dim](Rng& rng) {
    Embedding e(dim);
    for (Eigen::Index i = 0; i < dim; ++i) e[i] = rng.normal();
    return Embedding(e / e.norm());
  };
}

/// Reward oracle wrapper shared by every optimizer in a benchmark. Each call
/// to `query` is one reward evaluation and is recorded.
class BlackBox {
 public:
  explicit BlackBox(RewardFn fn, std::string prefix = "q") : fn_(std::move(fn)), prefix_(std::move(prefix)) {}

  double query(const Embedding& z) {
    Item item{prefix_ + std::to_string(rewards_.size()), z, std::nullopt};
    return record(item);
  }

  double record(const Item& item) {
    const double r = fn_(item);
    require(std::isfinite(r), ErrorCode::non_finite, "reward for '" + item.id + "' is not finite");
    rewards_.push_back(r);
    if (r > best_) best_ = r, best_embedding_ = item.embedding;
    return r;
  }

  /// RewardFn view that counts through this box.
  RewardFn as_reward_fn() {
    return [this](const Item& item) { return record(item); };
  }

  std::size_t queries() const noexcept { return rewards_.size(); }
  const std::vector<double>& rewards() const noexcept { return rewards_; }
  double best() const noexcept { return best_; }
  const Embedding& best_embedding() const noexcept { return best_embedding_; }

 private:
  RewardFn fn_;
  std::string prefix_;
  std::vector<double> rewards_;
  double best_ = -std::numeric_limits<double>::infinity();
  Embedding best_embedding_;
};

struct OptimTrace {
  std::string method;
  std::vector<double> rewards;
  std::vector<double> best_so_far;
  Embedding best_embedding;

  double best() const { return best_so_far.empty() ? -std::numeric_limits<double>::infinity() : best_so_far.back(); }
  std::size_t queries() const { return rewards.size(); }
};

inline OptimTrace make_trace(std::string method, const BlackBox& box) {
  OptimTrace t;
  t.method = std::move(method);
  t.rewards = box.rewards();
  double b = -std::numeric_limits<double>::infinity();
  for (double r : t.rewards) t.best_so_far.push_back(b = std::max(b, r));
  t.best_embedding = box.best_embedding();
  return t;
}

inline Json to_json(const OptimTrace& t) {
  return Json{{"method", t.method}, {"queries", t.queries()}, {"rewards", t.rewards}, {"best_so_far", t.best_so_far}};
}

enum class Acquisition { ucb, ei };

struct BaselineConfig {
  std::size_t budget = 200;
  /// Random initial design size for BO.
  std::size_t batch_size = 10;
  Acquisition acquisition = Acquisition::ucb;
  double kappa = 2.0;
  double xi = 0.0;
  std::size_t pool_size = 1024;
  double ridge = 1e-3;
  /// 0 selects 4 + floor(3 ln dim).
  std::size_t cma_lambda = 0;
  double cma_sigma = 0.3;

  void validate() const {
    require(budget >= 1 && budget >= batch_size, ErrorCode::invalid_argument, "budget must be >= batch_size");
    require(batch_size >= 1, ErrorCode::invalid_argument, "batch_size must be >= 1");
    require(pool_size >= 1, ErrorCode::invalid_argument, "BO candidate pool must not be empty");
    require(kappa >= 0.0 && ridge >= 0.0 && cma_sigma > 0.0, ErrorCode::invalid_argument, "invalid baseline parameter");
  }
};

inline void to_json(Json& j, const BaselineConfig& c) {
  j = Json{{"budget", c.budget},       {"batch_size", c.batch_size},
           {"acquisition", c.acquisition == Acquisition::ucb ? "ucb" : "ei"},
           {"kappa", c.kappa},         {"xi", c.xi},
           {"pool_size", c.pool_size}, {"ridge", c.ridge},
           {"cma_lambda", c.cma_lambda}, {"cma_sigma", c.cma_sigma}};
}

inline void from_json(const Json& j, BaselineConfig& c) {
  read_optional(j, "budget", c.budget);
  read_optional(j, "batch_size", c.batch_size);
  if (auto it = j.find("acquisition"); it != j.end()) {
    const auto s = it->get<std::string>();
    require(s == "ucb" || s == "ei", ErrorCode::invalid_argument, "unknown acquisition '" + s + "'");
    c.acquisition = s == "ucb" ? Acquisition::ucb : Acquisition::ei;
  }
  read_optional(j, "kappa", c.kappa);
  read_optional(j, "xi", c.xi);
  read_optional(j, "pool_size", c.pool_size);
  read_optional(j, "ridge", c.ridge);
  read_optional(j, "cma_lambda", c.cma_lambda);
  read_optional(j, "cma_sigma", c.cma_sigma);
}

// ---------------------------------------------------------------------------
// Random search

inline OptimTrace random_search(BlackBox& box, const DomainSampler& sampler, std::size_t budget, Rng& rng) {
  for (std::size_t q = 0; q < budget; ++q) box.query(sampler(rng));
  return make_trace("random", box);
}

// ---------------------------------------------------------------------------
// Bayesian optimization

inline double expected_improvement(double mean, double sd, double best, double xi = 0.0) {
  const double gain = mean - best - xi;
  if (sd <= 1e-12) return std::max(0.0, gain);
  const double z = gain / sd;
  return gain * stats::normal_cdf(z) + sd * stats::normal_pdf(z);
}

inline double ucb(double mean, double sd, double kappa) { return mean + kappa * sd; }

/// Posterior mean and variance for each column of `candidates`.
struct PoolPosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

inline PoolPosterior pool_posterior(const GPModel& gp, const Eigen::Ref<const Eigen::MatrixXd>& candidates) {
  require(candidates.rows() == gp.dim(), ErrorCode::shape_mismatch, "bo: candidate length mismatch");
  const auto& z = gp.inputs();
  const double l2 = gp.kernel().lengthscale * gp.kernel().lengthscale;
  const Eigen::VectorXd zn = z.rowwise().squaredNorm();
  const Eigen::RowVectorXd cn = candidates.colwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * (z * candidates);
  k.colwise() += zn;
  k.rowwise() += cn;
  k = (gp.kernel().variance * (-k.array().max(0.0) / (2.0 * l2)).exp()).matrix();
  PoolPosterior out;
  out.mean = k.transpose() * gp.weights();
  const Eigen::MatrixXd v = gp.cholesky().triangularView<Eigen::Lower>().solve(k);
  out.variance = (gp.kernel().variance - v.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
  return out;
}

/// Index of the candidate column maximizing the acquisition (ties: lowest index).
inline std::size_t bo_select(const GPModel& gp, Acquisition acq, const Eigen::Ref<const Eigen::MatrixXd>& candidates,
                             double kappa, double best_observed, double xi = 0.0) {
  require(candidates.cols() >= 1, ErrorCode::invalid_argument, "bo_step: empty candidate pool");
  const PoolPosterior post = pool_posterior(gp, candidates);
  std::size_t arg = 0;
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < candidates.cols(); ++c) {
    const double sd = std::sqrt(post.variance[c]);
    const double a = acq == Acquisition::ucb ? ucb(post.mean[c], sd, kappa)
                                             : expected_improvement(post.mean[c], sd, best_observed, xi);
    if (a > top) top = a, arg = static_cast<std::size_t>(c);
  }
  return arg;
}

/// Draws a fresh candidate pool and returns the acquisition maximizer.
inline Embedding bo_step(const GPModel& gp, Acquisition acq, const DomainSampler& sampler, std::size_t pool_size,
                         double kappa, double best_observed, Rng& rng) {
  require(pool_size >= 1, ErrorCode::invalid_argument, "bo_step: empty candidate pool");
  Eigen::MatrixXd pool(gp.dim(), static_cast<Eigen::Index>(pool_size));
  for (Eigen::Index c = 0; c < pool.cols(); ++c) pool.col(c) = sampler(rng);
  return pool.col(static_cast<Eigen::Index>(bo_select(gp, acq, pool, kappa, best_observed)));
}

/// Sequential BO, refitting the GP from scratch after every query.
inline OptimTrace run_bo(BlackBox& box, const DomainSampler& sampler, const BaselineConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<Embedding> zs;
  std::vector<double> ys;
  for (std::size_t q = 0; q < cfg.batch_size; ++q) {
    zs.push_back(sampler(rng));
    ys.push_back(box.query(zs.back()));
  }
  while (zs.size() < cfg.budget) {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(zs.size()), zs.front().size());
    for (std::size_t i = 0; i < zs.size(); ++i) z.row(static_cast<Eigen::Index>(i)) = zs[i].transpose();
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    const GPModel gp = GPModel::fit(z, y, {1.0, median_heuristic(z)}, cfg.ridge);
    const double best = *std::max_element(ys.begin(), ys.end());
    zs.push_back(bo_step(gp, cfg.acquisition, sampler, cfg.pool_size, cfg.kappa, best, rng));
    ys.push_back(box.query(zs.back()));
  }
  return make_trace(cfg.acquisition == Acquisition::ucb ? "bo-ucb" : "bo-ei", box);
}

// ---------------------------------------------------------------------------
// CMA-ES

/// Log-decreasing positive recombination weights for the best mu of lambda, summing to 1.
inline Eigen::VectorXd cma_weights(std::size_t lambda) {
  const std::size_t mu = lambda / 2;
  Eigen::VectorXd w(static_cast<Eigen::Index>(mu));
  for (std::size_t i = 0; i < mu; ++i) w[static_cast<Eigen::Index>(i)] = std::log(static_cast<double>(lambda) / 2.0 + 0.5) - std::log(static_cast<double>(i + 1));
  return w / w.sum();
}

/// m' = m + sigma * sum_i w_i y_i over the rank-ordered steps `ys` (columns).
inline Eigen::VectorXd cma_recombine(const Eigen::VectorXd& mean, double sigma, const Eigen::MatrixXd& ys,
                                     const Eigen::VectorXd& weights) {
  require(ys.cols() == weights.size(), ErrorCode::shape_mismatch, "cma_recombine: weights/steps mismatch");
  return mean + sigma * (ys * weights);
}

struct CmaState {
  Eigen::VectorXd mean;
  double sigma = 0.3;
  Eigen::MatrixXd cov;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_c;
  std::size_t generation = 0;
};

/// (mu/mu_w, lambda)-CMA-ES maximizing the reward (minimizing its negation).
/// Queries stop exactly at the budget; a truncated final generation is
/// evaluated but does not update the strategy.
inline OptimTrace cmaes_run(BlackBox& box, Eigen::Index dim, const BaselineConfig& cfg, Rng& rng,
                            std::optional<Embedding> initial_mean = std::nullopt) {
  cfg.validate();
  require(dim >= 1 && dim <= 256, ErrorCode::invalid_argument, "cmaes: dim must lie in [1, 256]");
  const double n = static_cast<double>(dim);
  const std::size_t lambda = cfg.cma_lambda ? cfg.cma_lambda : 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(n)));
  require(lambda >= 2, ErrorCode::invalid_argument, "cmaes: lambda must be >= 2");
  const Eigen::VectorXd w = cma_weights(lambda);
  const std::size_t mu = static_cast<std::size_t>(w.size());
  const double mueff = 1.0 / w.squaredNorm();
  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  CmaState s;
  if (initial_mean) {
    require(initial_mean->size() == dim, ErrorCode::shape_mismatch, "cmaes: initial mean length mismatch");
    s.mean = *initial_mean;
  } else {
    s.mean = Eigen::VectorXd::Zero(dim);
  }
  s.sigma = cfg.cma_sigma;
  s.cov = Eigen::MatrixXd::Identity(dim, dim);
  s.path_sigma = Eigen::VectorXd::Zero(dim);
  s.path_c = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(dim);

  while (box.queries() < cfg.budget) {
    const std::size_t count = std::min(lambda, cfg.budget - box.queries());
    Eigen::MatrixXd ys(dim, static_cast<Eigen::Index>(count));
    std::vector<double> fitness(count);
    for (std::size_t k = 0; k < count; ++k) {
      Eigen::VectorXd zk(dim);
      for (Eigen::Index i = 0; i < dim; ++i) zk[i] = rng.normal();
      ys.col(static_cast<Eigen::Index>(k)) = basis * scale.cwiseProduct(zk);
      const double r = box.query(s.mean + s.sigma * ys.col(static_cast<Eigen::Index>(k)));
      fitness[k] = -r;
    }
    if (count < lambda) break;

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
    Eigen::MatrixXd ysel(dim, static_cast<Eigen::Index>(mu));
    for (std::size_t i = 0; i < mu; ++i) ysel.col(static_cast<Eigen::Index>(i)) = ys.col(static_cast<Eigen::Index>(order[i]));
    const Eigen::VectorXd yw = ysel * w;
    s.mean = cma_recombine(s.mean, s.sigma, ysel, w);

    const Eigen::VectorXd cinv_yw = basis * (basis.transpose() * yw).cwiseQuotient(scale);
    s.path_sigma = (1.0 - cs) * s.path_sigma + std::sqrt(cs * (2.0 - cs) * mueff) * cinv_yw;
    s.generation += 1;
    const double ps_norm = s.path_sigma.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(s.generation)));
    const bool hsig = ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * chi_n;
    s.path_c = (1.0 - cc) * s.path_c + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * yw;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < mu; ++i)
      rank_mu += w[static_cast<Eigen::Index>(i)] * ysel.col(static_cast<Eigen::Index>(i)) * ysel.col(static_cast<Eigen::Index>(i)).transpose();
    const double delta_h = hsig ? 0.0 : cc * (2.0 - cc);
    s.cov = (1.0 - c1 - cmu) * s.cov + c1 * (s.path_c * s.path_c.transpose() + delta_h * s.cov) + cmu * rank_mu;
    s.sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1.0));
    require(std::isfinite(s.sigma) && s.mean.allFinite(), ErrorCode::non_finite, "cmaes: strategy diverged");

    s.cov = 0.5 * (s.cov + s.cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.cov);
    basis = eig.eigenvectors();
    scale = eig.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
  }
  return make_trace("cma-es", box);
}

}  // namespace mindpilot

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"

namespace mindpilot {

/// k(a, b) = variance * exp(-|a - b|^2 / (2 lengthscale^2))
struct RbfKernel {
  double variance = 1.0;
  double lengthscale = 1.0;

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const {
    return variance * std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale * lengthscale));
  }
};

/// Median pairwise Euclidean distance of the rows of `z` (1.0 when undefined).
inline double median_heuristic(const Eigen::Ref<const Eigen::MatrixXd>& z) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) d.push_back((z.row(i) - z.row(j)).norm());
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double m = *mid;
  if (d.size() % 2 == 0) m = 0.5 * (m + *std::max_element(d.begin(), mid));
  return m > 0.0 ? m : 1.0;
}

/// Zero-mean GP regression with an RBF kernel and ridge term:
///   mean(z) = k(z, Z)^T (K(Z, Z) + ridge I)^-1 y
///
/// The lower Cholesky factor of K + ridge I is kept so observations can be
/// appended in O(n^2) instead of refactoring from scratch.
class GPModel {
 public:
  static constexpr Eigen::Index max_observations = 5000;

  GPModel() = default;

  /// Rows of `inputs` are observations.
  static GPModel fit(const Eigen::Ref<const Eigen::MatrixXd>& inputs, const Eigen::Ref<const Eigen::VectorXd>& targets,
                     RbfKernel kernel, double ridge) {
    require(inputs.rows() >= 1, ErrorCode::invalid_argument, "gp_fit: need at least one observation");
    require(inputs.rows() == targets.size(), ErrorCode::shape_mismatch, "gp_fit: inputs/targets length mismatch");
    require(inputs.rows() <= max_observations, ErrorCode::invalid_argument,
            "gp_fit: " + std::to_string(inputs.rows()) + " observations exceeds the cubic-cost guard of " +
                std::to_string(max_observations));
    require(ridge >= 0.0, ErrorCode::invalid_argument, "gp_fit: ridge must be >= 0");
    require(kernel.variance > 0.0 && kernel.lengthscale > 0.0, ErrorCode::invalid_argument,
            "gp_fit: kernel variance and lengthscale must be positive");
    require(inputs.allFinite() && targets.allFinite(), ErrorCode::non_finite, "gp_fit: non-finite data");
    GPModel m;
    m.kernel_ = kernel;
    m.ridge_ = ridge;
    m.inputs_.resize(0, inputs.cols());
    m.reserve(inputs.rows());
    m.n_ = inputs.rows();
    m.inputs_.topRows(m.n_) = inputs;
    m.targets_.head(m.n_) = targets;
    m.sq_norms_.head(m.n_) = inputs.rowwise().squaredNorm();
    Eigen::MatrixXd k(m.n_, m.n_);
    for (Eigen::Index i = 0; i < m.n_; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel(inputs.row(i).transpose(), inputs.row(j).transpose());
    k.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    m.lower_.topLeftCorner(m.n_, m.n_) = llt.matrixL();
    m.check_pivots(llt.info() == Eigen::Success);
    m.forward_.head(m.n_) = m.cholesky().triangularView<Eigen::Lower>().solve(m.targets());
    m.solve_weights();
    return m;
  }

  /// Adds one observation by extending the Cholesky factor in O(n^2).
  void append(const Eigen::Ref<const Eigen::VectorXd>& z, double y) {
    extend(z, y);
    solve_weights();
  }

  /// Appends rows of `z`, solving for the weights once at the end.
  void append(const Eigen::Ref<const Eigen::MatrixXd>& z, const Eigen::Ref<const Eigen::VectorXd>& y) {
    require(z.rows() == y.size(), ErrorCode::shape_mismatch, "gp append: inputs/targets length mismatch");
    for (Eigen::Index i = 0; i < z.rows(); ++i) extend(z.row(i).transpose(), y[i]);
    if (z.rows() > 0) solve_weights();
  }

  double mean(const Eigen::Ref<const Eigen::VectorXd>& z) const { return kernel_vector(z).dot(weights_); }

  /// d mean / dz = -(1 / l^2) sum_i w_i k(z, z_i) (z - z_i); `variance` enters through k.
  Embedding mean_gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    const Eigen::VectorXd c = kernel_vector(z).cwiseProduct(weights_);
    const Embedding g = c.sum() * z - inputs().transpose() * c;
    return -g / (kernel_.lengthscale * kernel_.lengthscale);
  }

  /// Posterior variance k(z,z) - k(z,Z)^T (K + ridge I)^-1 k(z,Z), floored at 0.
  double variance(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    const Eigen::VectorXd v = cholesky().triangularView<Eigen::Lower>().solve(kernel_vector(z));
    return std::max(0.0, kernel_(z, z) - v.squaredNorm());
  }

  Eigen::Index size() const noexcept { return n_; }
  Eigen::Index dim() const noexcept { return inputs_.cols(); }
  bool fitted() const noexcept { return n_ > 0; }
  Eigen::Block<const Eigen::MatrixXd> inputs() const { return inputs_.topRows(n_); }
  Eigen::VectorBlock<const Eigen::VectorXd> targets() const { return targets_.head(n_); }
  /// (K + ridge I)^-1 y
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  const RbfKernel& kernel() const noexcept { return kernel_; }
  double ridge() const noexcept { return ridge_; }
  /// Lower Cholesky factor of K + ridge I.
  Eigen::Block<const Eigen::MatrixXd> cholesky() const { return lower_.topLeftCorner(n_, n_); }

  Json to_json() const {
    return Json{{"kernel", {{"type", "rbf"}, {"variance", kernel_.variance}, {"lengthscale", kernel_.lengthscale}}},
                {"ridge", ridge_},
                {"inputs", matrix_to_json(inputs())},
                {"targets", to_json_array(targets())}};
  }

  static GPModel from_json(const Json& j) {
    RbfKernel k{j.at("kernel").at("variance").get<double>(), j.at("kernel").at("lengthscale").get<double>()};
    return fit(matrix_from_json(j.at("inputs")), vector_from_json(j.at("targets")), k, j.at("ridge").get<double>());
  }

 private:
  /// Grows backing storage geometrically so appends do not copy the factor each time.
  void reserve(Eigen::Index n) {
    if (n <= lower_.rows()) return;
    const Eigen::Index cap = std::max<Eigen::Index>(n, 2 * lower_.rows());
    const Eigen::Index f = inputs_.cols();
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(cap, cap);
    lower.topLeftCorner(n_, n_) = lower_.topLeftCorner(n_, n_);
    lower_.swap(lower);
    Eigen::MatrixXd inputs(cap, f);
    inputs.topRows(n_) = inputs_.topRows(n_);
    inputs_.swap(inputs);
    targets_.conservativeResize(cap);
    sq_norms_.conservativeResize(cap);
    forward_.conservativeResize(cap);
  }

  Eigen::VectorXd kernel_vector(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    require(fitted(), ErrorCode::invalid_argument, "gp: model not fitted");
    require(z.size() == dim(), ErrorCode::shape_mismatch,
            "gp: query has length " + std::to_string(z.size()) + ", model uses " + std::to_string(dim()));
    Eigen::VectorXd d2 = sq_norms_.head(n_) - 2.0 * (inputs() * z);
    d2.array() += z.squaredNorm();
    const double inv = 1.0 / (2.0 * kernel_.lengthscale * kernel_.lengthscale);
    return kernel_.variance * (-d2.array().max(0.0) * inv).exp().matrix();
  }

  void extend(const Eigen::Ref<const Eigen::VectorXd>& z, double y) {
    require(fitted(), ErrorCode::invalid_argument, "gp append: model not fitted");
    require(z.size() == dim(), ErrorCode::shape_mismatch, "gp append: dimension mismatch");
    require(size() + 1 <= max_observations, ErrorCode::invalid_argument, "gp append: observation cap reached");
    require(z.allFinite() && std::isfinite(y), ErrorCode::non_finite, "gp append: non-finite data");
    const Eigen::Index n = n_;
    const Eigen::VectorXd l = cholesky().triangularView<Eigen::Lower>().solve(kernel_vector(z));
    const double d2 = kernel_(z, z) + ridge_ - l.squaredNorm();
    require(d2 > pivot_floor(), ErrorCode::ill_conditioned,
            "ill-conditioned: appended observation duplicates existing data (set ridge > 0)");
    reserve(n + 1);
    lower_.row(n).head(n) = l.transpose();
    lower_.col(n).head(n).setZero();
    lower_(n, n) = std::sqrt(d2);
    inputs_.row(n) = z.transpose();
    targets_[n] = y;
    sq_norms_[n] = z.squaredNorm();
    // Forward solve L b = y extends by one entry.
    forward_[n] = (y - l.dot(forward_.head(n))) / lower_(n, n);
    n_ = n + 1;
  }

  double pivot_floor() const { return 1e-12 * kernel_.variance; }

  void check_pivots(bool factored) const {
    bool ok = factored;
    for (Eigen::Index i = 0; ok && i < n_; ++i) ok = lower_(i, i) * lower_(i, i) > pivot_floor();
    require(ok, ErrorCode::ill_conditioned, "ill-conditioned: K + ridge I is singular (duplicate inputs with ridge 0?)");
  }

  void solve_weights() {
    const auto l = cholesky().triangularView<Eigen::Lower>();
    weights_ = l.transpose().solve(forward_.head(n_));
  }

  RbfKernel kernel_;
  double ridge_ = 0.0;
  Eigen::Index n_ = 0;
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd targets_;
  Eigen::VectorXd sq_norms_;
  Eigen::MatrixXd lower_;
  Eigen::VectorXd forward_;
  Eigen::VectorXd weights_;
};

inline GPModel gp_fit(const Eigen::Ref<const Eigen::MatrixXd>& inputs, const Eigen::Ref<const Eigen::VectorXd>& targets,
                      RbfKernel kernel, double ridge) {
  return GPModel::fit(inputs, targets, kernel, ridge);
}
inline double gp_mean(const GPModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) { return model.mean(z); }
inline Embedding gp_mean_gradient(const GPModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return model.mean_gradient(z);
}

// ---------------------------------------------------------------------------
// Pseudo-target guidance

enum class GuidanceDirection {
  /// z + eta * grad: climbs the reward surrogate.
  ascent,
  /// z - eta * grad: the literal gradient-step form.
  descent,
};

struct GuidanceConfig {
  double eta0 = 0.1;
  /// Final step size of the linear decay; negative means 0.1 * eta0.
  double eta_min = -1.0;
  /// Reward scaling applied before GP fitting.
  double gamma = 10.0;
  GuidanceDirection direction = GuidanceDirection::ascent;

  double final_eta() const { return eta_min < 0.0 ? 0.1 * eta0 : eta_min; }

  void validate() const {
    require(eta0 >= 0.0, ErrorCode::invalid_argument, "eta0 must be >= 0");
    require(gamma > 0.0, ErrorCode::invalid_argument, "gamma must be positive");
  }
};

inline void to_json(Json& j, const GuidanceConfig& c) {
  j = Json{{"eta0", c.eta0},
           {"eta_min", c.final_eta()},
           {"gamma", c.gamma},
           {"direction", c.direction == GuidanceDirection::ascent ? "ascent" : "descent"}};
}

inline void from_json(const Json& j, GuidanceConfig& c) {
  read_optional(j, "eta0", c.eta0);
  read_optional(j, "eta_min", c.eta_min);
  read_optional(j, "gamma", c.gamma);
  if (auto it = j.find("direction"); it != j.end()) {
    const auto s = it->get<std::string>();
    require(s == "ascent" || s == "descent", ErrorCode::invalid_argument, "unknown guidance direction '" + s + "'");
    c.direction = s == "ascent" ? GuidanceDirection::ascent : GuidanceDirection::descent;
  }
}

/// Linear decay from eta0 at t = 0 to eta_min at t = t_max.
inline double eta_schedule(const GuidanceConfig& cfg, std::size_t t, std::size_t t_max) {
  require(t <= t_max || t_max == 0, ErrorCode::invalid_argument, "eta_schedule: t exceeds t_max");
  if (t_max == 0) return cfg.eta0;
  const double frac = static_cast<double>(t) / static_cast<double>(t_max);
  return cfg.eta0 + (cfg.final_eta() - cfg.eta0) * frac;
}

inline Embedding pseudo_target(const Eigen::Ref<const Eigen::VectorXd>& z, const GPModel& model, double eta,
                               GuidanceDirection direction = GuidanceDirection::ascent) {
  if (eta == 0.0) return z;
  const Embedding g = model.mean_gradient(z);
  return direction == GuidanceDirection::ascent ? Embedding(z + eta * g) : Embedding(z - eta * g);
}

inline double scale_reward(double similarity, double gamma) {
  require(gamma > 0.0, ErrorCode::invalid_argument, "scale_reward: gamma must be positive");
  return similarity * gamma;
}

}  // namespace mindpilot

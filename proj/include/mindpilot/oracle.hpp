#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/core/rng.hpp"

namespace mindpilot {

/// Simulated evoked response: channels x timepoints.
struct NeuralResponse {
  Eigen::MatrixXd samples;
  double sampling_rate = 250.0;

  Eigen::Index channels() const noexcept { return samples.rows(); }
  Eigen::Index timepoints() const noexcept { return samples.cols(); }
};

/// Anything that maps a stimulus to a response. Optimizers and feature code
/// only ever see this signature, never the oracle's weights.
using ResponseFn = std::function<NeuralResponse(const Item&, Rng&)>;

enum class Nonlinearity { tanh, identity };

inline std::string to_string(Nonlinearity n) { return n == Nonlinearity::tanh ? "tanh" : "identity"; }

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "tanh") return Nonlinearity::tanh;
  if (s == "identity") return Nonlinearity::identity;
  fail(ErrorCode::invalid_argument, "unknown nonlinearity '" + s + "'");
}

struct OracleConfig {
  Eigen::Index embedding_dim = 1024;
  Eigen::Index hidden = 2048;
  Eigen::Index channels = 17;
  Eigen::Index timepoints = 250;
  double sampling_rate = 250.0;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  double noise_std = 0.0;
  /// Time constant of the causal exponential smoother, in samples; 0 disables it.
  double smoothing_width = 5.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(embedding_dim > 0 && hidden > 0 && channels > 0 && timepoints > 0, ErrorCode::invalid_argument,
            "oracle dimensions must be positive (embedding_dim, hidden, channels, timepoints)");
    require(sampling_rate > 0.0, ErrorCode::invalid_argument, "oracle sampling_rate must be positive");
    require(noise_std >= 0.0 && std::isfinite(noise_std), ErrorCode::invalid_argument, "oracle noise_std must be >= 0");
    require(smoothing_width >= 0.0, ErrorCode::invalid_argument, "oracle smoothing_width must be >= 0");
  }
};

inline void to_json(Json& j, const OracleConfig& c) {
  j = Json{{"embedding_dim", c.embedding_dim}, {"hidden", c.hidden},
           {"channels", c.channels},           {"timepoints", c.timepoints},
           {"sampling_rate", c.sampling_rate}, {"nonlinearity", to_string(c.nonlinearity)},
           {"noise_std", c.noise_std},         {"smoothing_width", c.smoothing_width},
           {"seed", c.seed}};
}

inline void from_json(const Json& j, OracleConfig& c) {
  read_optional(j, "embedding_dim", c.embedding_dim);
  read_optional(j, "hidden", c.hidden);
  read_optional(j, "channels", c.channels);
  read_optional(j, "timepoints", c.timepoints);
  read_optional(j, "sampling_rate", c.sampling_rate);
  if (j.contains("nonlinearity")) c.nonlinearity = nonlinearity_from_string(j.at("nonlinearity").get<std::string>());
  read_optional(j, "noise_std", c.noise_std);
  read_optional(j, "smoothing_width", c.smoothing_width);
  read_optional(j, "seed", c.seed);
}

namespace detail {
/// y[t] = rho * y[t-1] + (1 - rho) * x[t] along each row.
inline void causal_smooth_rows(Eigen::Ref<Eigen::MatrixXd> m, double width) {
  if (width <= 0.0) return;
  const double rho = std::exp(-1.0 / width);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      acc = rho * acc + (1.0 - rho) * m(r, t);
      m(r, t) = acc;
    }
  }
}
}  // namespace detail

class SemanticDecoder;

/// Synthetic black-box brain: embedding -> hidden (tanh) -> C x T readout,
/// causally smoothed in time, plus i.i.d. Gaussian sensor noise.
///
/// Handles are cheap to copy and immutable; weights are shared.
class BrainOracle {
 public:
  static BrainOracle make(const OracleConfig& config) {
    config.validate();
    auto w = std::make_shared<Weights>();
    Rng rng(config.seed, 0x0a11ce);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(config.embedding_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(config.hidden));
    w->input = Eigen::MatrixXd(config.hidden, config.embedding_dim);
    for (Eigen::Index c = 0; c < w->input.cols(); ++c)
      for (Eigen::Index r = 0; r < w->input.rows(); ++r) w->input(r, c) = s1 * rng.normal();
    const Eigen::Index out = config.channels * config.timepoints;
    Eigen::MatrixXd readout(out, config.hidden);
    for (Eigen::Index c = 0; c < readout.cols(); ++c)
      for (Eigen::Index r = 0; r < readout.rows(); ++r) readout(r, c) = s2 * rng.normal();
    // Fold the (linear) temporal smoother into the readout: each column is one
    // hidden unit's C x T footprint, stored channel-major.
    for (Eigen::Index h = 0; h < config.hidden; ++h) {
      Eigen::MatrixXd footprint = Eigen::Map<Eigen::MatrixXd>(readout.col(h).data(), config.timepoints, config.channels)
                                      .transpose();
      detail::causal_smooth_rows(footprint, config.smoothing_width);
      Eigen::MatrixXd back = footprint.transpose();
      readout.col(h) = Eigen::Map<Eigen::VectorXd>(back.data(), out);
    }
    w->readout = std::move(readout);
    return BrainOracle(config, std::move(w));
  }

  /// Zero-weight oracle; useful as a null model.
  static BrainOracle zeros(const OracleConfig& config) {
    config.validate();
    auto w = std::make_shared<Weights>();
    w->input = Eigen::MatrixXd::Zero(config.hidden, config.embedding_dim);
    w->readout = Eigen::MatrixXd::Zero(config.channels * config.timepoints, config.hidden);
    return BrainOracle(config, std::move(w));
  }

  const OracleConfig& config() const noexcept { return config_; }

  /// Same weights, different sensor noise.
  BrainOracle with_noise(double noise_std) const {
    OracleConfig c = config_;
    c.noise_std = noise_std;
    c.validate();
    return BrainOracle(c, weights_);
  }

  NeuralResponse forward_noiseless(const Embedding& e) const {
    require(e.size() == config_.embedding_dim, ErrorCode::shape_mismatch,
            "oracle expects embedding length " + std::to_string(config_.embedding_dim) + ", got " +
                std::to_string(e.size()));
    Eigen::VectorXd hidden = weights_->input * e;
    if (config_.nonlinearity == Nonlinearity::tanh) hidden = hidden.array().tanh().matrix();
    const Eigen::VectorXd flat = weights_->readout * hidden;
    NeuralResponse x;
    x.sampling_rate = config_.sampling_rate;
    x.samples = Eigen::Map<const Eigen::MatrixXd>(flat.data(), config_.timepoints, config_.channels).transpose();
    return x;
  }

  NeuralResponse forward(const Embedding& e, Rng& rng) const {
    NeuralResponse x = forward_noiseless(e);
    if (config_.noise_std > 0.0)
      for (Eigen::Index t = 0; t < x.samples.cols(); ++t)
        for (Eigen::Index c = 0; c < x.samples.rows(); ++c) x.samples(c, t) += config_.noise_std * rng.normal();
    return x;
  }

  NeuralResponse operator()(const Item& item, Rng& rng) const { return forward(item.embedding, rng); }

  ResponseFn as_function() const {
    return [self = *this](const Item& item, Rng& rng) { return self.forward(item.embedding, rng); };
  }

 private:
  struct Weights {
    Eigen::MatrixXd input;    // hidden x F
    Eigen::MatrixXd readout;  // (C*T) x hidden, smoother folded in
  };

  BrainOracle(OracleConfig config, std::shared_ptr<const Weights> w) : config_(config), weights_(std::move(w)) {}

  friend class SemanticDecoder;

  OracleConfig config_;
  std::shared_ptr<const Weights> weights_;
};

inline BrainOracle make_oracle(const OracleConfig& config) { return BrainOracle::make(config); }

inline NeuralResponse brain_forward(const Item& item, const BrainOracle& oracle, Rng& rng) {
  return oracle.forward(item.embedding, rng);
}

/// Affine, non-decreasing map from cosine similarity to a rating.
struct RatingLink {
  double offset = 0.0;
  double scale = 1.0;

  double operator()(double similarity) const { return offset + scale * similarity; }
};

struct RaterConfig {
  Embedding target;
  double noise_std = 0.0;
  RatingLink link;

  void validate() const {
    require(target.size() > 0, ErrorCode::invalid_argument, "rater target must be non-empty");
    require(noise_std >= 0.0, ErrorCode::invalid_argument, "rater noise_std must be >= 0");
    require(link.scale >= 0.0, ErrorCode::invalid_argument, "rater link must be non-decreasing (scale >= 0)");
  }
};

inline void to_json(Json& j, const RaterConfig& c) {
  j = Json{{"target", to_json_array(c.target)},
           {"noise_std", c.noise_std},
           {"link", {{"offset", c.link.offset}, {"scale", c.link.scale}}}};
}

inline void from_json(const Json& j, RaterConfig& c) {
  c.target = vector_from_json(j.at("target"));
  read_optional(j, "noise_std", c.noise_std);
  if (j.contains("link")) {
    read_optional(j.at("link"), "offset", c.link.offset);
    read_optional(j.at("link"), "scale", c.link.scale);
  }
}

/// Synthetic human rating on [0, 1]. Noise is drawn only when noise_std > 0.
inline double synthetic_rate(const Item& item, const RaterConfig& cfg, Rng& rng) {
  cfg.validate();
  double r = cfg.link(cosine_sim(item.embedding, cfg.target));
  if (cfg.noise_std > 0.0) r += cfg.noise_std * rng.normal();
  return std::clamp(r, 0.0, 1.0);
}

}  // namespace mindpilot

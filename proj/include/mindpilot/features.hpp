#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/oracle.hpp"
#include "mindpilot/stats.hpp"

namespace mindpilot {

enum class FeatureKind { semantic, psd, rating };

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::semantic: return "semantic";
    case FeatureKind::psd: return "psd";
    case FeatureKind::rating: return "rating";
  }
  return "semantic";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "semantic") return FeatureKind::semantic;
  if (s == "psd") return FeatureKind::psd;
  if (s == "rating") return FeatureKind::rating;
  fail(ErrorCode::invalid_argument, "unknown feature kind '" + s + "'");
}

struct FeatureVector {
  Eigen::VectorXd values;
  FeatureKind kind = FeatureKind::semantic;
};

/// What the reward compares against. Rating targets carry no feature: the
/// reward arrives from a rater instead.
struct Target {
  FeatureKind kind = FeatureKind::semantic;
  std::optional<FeatureVector> feature;

  static Target from_feature(FeatureVector f) {
    require(f.kind != FeatureKind::rating, ErrorCode::invalid_argument, "feature targets must be semantic or psd");
    Target t;
    t.kind = f.kind;
    t.feature = std::move(f);
    return t;
  }
  static Target rating() { return Target{FeatureKind::rating, std::nullopt}; }
};

// ---------------------------------------------------------------------------
// Semantic decoder

/// Linear map from a flattened response back to embedding space: the ridge
/// pseudo-inverse of the oracle's noiseless map, linearized at the origin.
/// For an identity-nonlinearity oracle it inverts the forward map exactly.
class SemanticDecoder {
 public:
  /// `ridge` is relative to the mean eigenvalue of the normal matrix.
  static SemanticDecoder from_oracle(const BrainOracle& oracle, double ridge = 1e-6) {
    require(ridge > 0.0, ErrorCode::invalid_argument, "decoder ridge must be positive");
    const auto& w = *oracle.weights_;
    const Eigen::MatrixXd gram_hidden = w.readout.transpose() * w.readout;  // H x H
    const Eigen::MatrixXd normal = w.input.transpose() * gram_hidden * w.input;  // F x F
    const double lambda = ridge * normal.trace() / static_cast<double>(normal.rows());
    Eigen::MatrixXd regularized = normal;
    regularized.diagonal().array() += lambda > 0.0 ? lambda : ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(regularized);
    require(llt.info() == Eigen::Success, ErrorCode::ill_conditioned, "semantic decoder: normal matrix not SPD");
    SemanticDecoder d;
    // D = (M^T M + lambda I)^-1 M^T with M = readout * input.
    d.projection_ = llt.solve((w.readout * w.input).transpose());
    d.channels_ = oracle.config().channels;
    d.timepoints_ = oracle.config().timepoints;
    return d;
  }

  /// Arbitrary linear projection (rows = output features, cols = C*T).
  static SemanticDecoder from_matrix(Eigen::MatrixXd projection, Eigen::Index channels, Eigen::Index timepoints) {
    require(projection.cols() == channels * timepoints, ErrorCode::shape_mismatch, "decoder projection width != C*T");
    SemanticDecoder d;
    d.projection_ = std::move(projection);
    d.channels_ = channels;
    d.timepoints_ = timepoints;
    return d;
  }

  Eigen::Index input_dim() const noexcept { return projection_.cols(); }
  Eigen::Index output_dim() const noexcept { return projection_.rows(); }

  FeatureVector encode(const NeuralResponse& x) const {
    require(x.channels() == channels_ && x.timepoints() == timepoints_, ErrorCode::shape_mismatch,
            "semantic decoder expects a " + std::to_string(channels_) + "x" + std::to_string(timepoints_) + " response");
    const Eigen::MatrixXd by_time = x.samples.transpose();  // column-major => index c*T + t
    const Eigen::Map<const Eigen::VectorXd> flat(by_time.data(), by_time.size());
    return FeatureVector{projection_ * flat, FeatureKind::semantic};
  }

 private:
  SemanticDecoder() = default;

  Eigen::MatrixXd projection_;
  Eigen::Index channels_ = 0;
  Eigen::Index timepoints_ = 0;
};

inline FeatureVector semantic_encode(const NeuralResponse& x, const SemanticDecoder& decoder) { return decoder.encode(x); }

// ---------------------------------------------------------------------------
// Spectral features

struct Band {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

struct BandSpec {
  std::vector<Band> bands;

  static BandSpec defaults() {
    return BandSpec{{{"delta", 1, 4}, {"theta", 4, 8}, {"alpha", 8, 13}, {"beta", 13, 30}, {"gamma", 30, 80}}};
  }

  std::size_t size() const noexcept { return bands.size(); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < bands.size(); ++i)
      if (bands[i].name == name) return i;
    return std::nullopt;
  }

  void validate(double sampling_rate) const {
    require(!bands.empty(), ErrorCode::invalid_argument, "band spec is empty");
    const double nyquist = sampling_rate / 2.0;
    for (std::size_t i = 0; i < bands.size(); ++i) {
      const Band& b = bands[i];
      require(b.lo > 0.0 && b.hi <= nyquist, ErrorCode::invalid_argument,
              "band '" + b.name + "' lies outside (0, Nyquist=" + std::to_string(nyquist) + " Hz)");
      require(b.lo < b.hi, ErrorCode::invalid_argument, "band '" + b.name + "' has lo >= hi");
      if (i > 0)
        require(bands[i - 1].hi <= b.lo, ErrorCode::invalid_argument,
                "bands must be ascending and non-overlapping ('" + bands[i - 1].name + "', '" + b.name + "')");
    }
  }
};

inline void to_json(Json& j, const BandSpec& spec) {
  j = Json::array();
  for (const auto& b : spec.bands) j.push_back({{"name", b.name}, {"lo", b.lo}, {"hi", b.hi}});
}

inline void from_json(const Json& j, BandSpec& spec) {
  spec.bands.clear();
  const Json& arr = j.is_object() ? j.at("bands") : j;
  for (const auto& b : arr) spec.bands.push_back({b.at("name").get<std::string>(), b.at("lo").get<double>(), b.at("hi").get<double>()});
}

/// Periodic Hann window.
inline Eigen::VectorXd hann_window(Eigen::Index n) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

/// One-sided Hann-windowed periodogram (power spectral density, units^2/Hz) at
/// bins f_k = k * fs / T, k = 0..T/2. Normalized so that
/// sum_k P[k] * (fs / T) == sum_n (w[n] x[n])^2 / sum_n w[n]^2.
inline Eigen::VectorXd periodogram(const Eigen::Ref<const Eigen::VectorXd>& signal, double sampling_rate) {
  const Eigen::Index n = signal.size();
  require(n >= 2, ErrorCode::invalid_argument, "periodogram needs at least 2 samples");
  const Eigen::VectorXd w = hann_window(n);
  const double u = w.squaredNorm();
  std::vector<double> windowed(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) windowed[static_cast<std::size_t>(i)] = w[i] * signal[i];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, windowed);
  const Eigen::Index half = n / 2;
  Eigen::VectorXd p(half + 1);
  for (Eigen::Index k = 0; k <= half; ++k) {
    double v = std::norm(spectrum[static_cast<std::size_t>(k)]) / (sampling_rate * u);
    const bool mirrored = k > 0 && !(n % 2 == 0 && k == half);
    p[k] = mirrored ? 2.0 * v : v;
  }
  return p;
}

/// Integrated power per band (sum of PSD bins with lo <= f < hi, times bin
/// width), one row per channel.
inline Eigen::MatrixXd band_powers(const NeuralResponse& x, const BandSpec& bands) {
  bands.validate(x.sampling_rate);
  const Eigen::Index t = x.timepoints();
  const double df = x.sampling_rate / static_cast<double>(t);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> bins;  // [first, last)
  for (const auto& b : bands.bands) {
    const auto first = static_cast<Eigen::Index>(std::ceil(b.lo / df - 1e-9));
    auto last = static_cast<Eigen::Index>(std::ceil(b.hi / df - 1e-9));
    last = std::min<Eigen::Index>(last, t / 2 + 1);
    require(last > first, ErrorCode::invalid_argument,
            "band '" + b.name + "' contains no frequency bin at resolution " + std::to_string(df) + " Hz");
    bins.emplace_back(first, last);
  }
  Eigen::MatrixXd out(x.channels(), static_cast<Eigen::Index>(bands.size()));
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    const Eigen::VectorXd p = periodogram(x.samples.row(c).transpose(), x.sampling_rate);
    for (std::size_t b = 0; b < bins.size(); ++b)
      out(c, static_cast<Eigen::Index>(b)) = p.segment(bins[b].first, bins[b].second - bins[b].first).sum() * df;
  }
  return out;
}

/// log(1 + band power), channel-major (all bands of channel 0, then channel 1, ...).
inline FeatureVector psd_encode(const NeuralResponse& x, const BandSpec& bands) {
  const Eigen::MatrixXd bp = band_powers(x, bands);
  Eigen::VectorXd v(bp.size());
  for (Eigen::Index c = 0; c < bp.rows(); ++c)
    for (Eigen::Index b = 0; b < bp.cols(); ++b) v[c * bp.cols() + b] = std::log1p(bp(c, b));
  return FeatureVector{std::move(v), FeatureKind::psd};
}

/// Mean squared amplitude per channel.
inline Eigen::VectorXd channel_power(const NeuralResponse& x) {
  return x.samples.rowwise().squaredNorm() / static_cast<double>(x.timepoints());
}

// ---------------------------------------------------------------------------
// Rewards and metrics

/// Feature extractors available to a reward. The semantic decoder is optional
/// so PSD-only setups need no oracle internals.
struct FeatureEncoder {
  std::optional<SemanticDecoder> semantic;
  BandSpec bands = BandSpec::defaults();

  FeatureVector encode(const NeuralResponse& x, FeatureKind kind) const {
    switch (kind) {
      case FeatureKind::semantic:
        require(semantic.has_value(), ErrorCode::invalid_argument, "no semantic decoder configured");
        return semantic->encode(x);
      case FeatureKind::psd: return psd_encode(x, bands);
      case FeatureKind::rating: break;
    }
    fail(ErrorCode::invalid_argument, "rating targets have no feature encoder; rewards come from a rater");
  }
};

inline double reward(const Item& item, const ResponseFn& oracle, const FeatureEncoder& encoder, const Target& target,
                     Rng& rng) {
  require(target.kind != FeatureKind::rating && target.feature.has_value(), ErrorCode::invalid_argument,
          "reward: target kind must be semantic or psd");
  require(target.feature->kind == target.kind, ErrorCode::invalid_argument, "reward: target feature kind mismatch");
  const FeatureVector f = encoder.encode(oracle(item, rng), target.kind);
  return cosine_sim(f.values, target.feature->values);
}

/// Binds oracle, encoder and target into a black-box reward with its own noise stream.
inline RewardFn make_reward_fn(ResponseFn oracle, FeatureEncoder encoder, Target target, Rng rng) {
  auto stream = std::make_shared<Rng>(std::move(rng));
  return [oracle = std::move(oracle), encoder = std::move(encoder), target = std::move(target),
          stream](const Item& item) { return reward(item, oracle, encoder, target, *stream); };
}

/// Target feature of a stimulus under the noiseless oracle.
inline Target target_from_item(const Item& item, const BrainOracle& oracle, const FeatureEncoder& encoder,
                               FeatureKind kind) {
  return Target::from_feature(encoder.encode(oracle.forward_noiseless(item.embedding), kind));
}

/// Semantic similarity score: cosine of semantic features of noise-free responses.
inline double score_ss(const Item& generated, const Item& target_item, const BrainOracle& oracle,
                       const SemanticDecoder& decoder) {
  return cosine_sim(decoder.encode(oracle.forward_noiseless(generated.embedding)).values,
                    decoder.encode(oracle.forward_noiseless(target_item.embedding)).values);
}

/// Intensity similarity score: cosine of per-channel power vectors of noise-free responses.
inline double score_is(const Item& generated, const Item& target_item, const BrainOracle& oracle) {
  return cosine_sim(channel_power(oracle.forward_noiseless(generated.embedding)),
                    channel_power(oracle.forward_noiseless(target_item.embedding)));
}

// ---------------------------------------------------------------------------
// Noise calibration

/// Pearson correlation, across probe items, between embedding similarity to a
/// reference item and semantic-feature similarity of the (noisy) evoked
/// response to the reference's noiseless feature.
inline double cross_modal_correlation(const BrainOracle& oracle, const SemanticDecoder& decoder,
                                      std::span<const Item> probes, const Item& reference, Rng rng) {
  const Eigen::VectorXd ref_feature = decoder.encode(oracle.forward_noiseless(reference.embedding)).values;
  std::vector<double> embed_sim, feature_sim;
  embed_sim.reserve(probes.size());
  feature_sim.reserve(probes.size());
  for (const auto& p : probes) {
    embed_sim.push_back(cosine_sim(p.embedding, reference.embedding));
    feature_sim.push_back(cosine_sim(decoder.encode(oracle.forward(p.embedding, rng)).values, ref_feature));
  }
  return stats::pearson(embed_sim, feature_sim);
}

/// Bisects the sensor noise level so the cross-modal correlation on the probe
/// set matches `target_r`. Every evaluation reuses the same noise stream, so
/// the correlation is a smooth function of the noise scale.
inline BrainOracle calibrate_oracle(const BrainOracle& oracle, const SemanticDecoder& decoder,
                                    std::span<const Item> probes, const Item& reference, double target_r = 0.23,
                                    std::uint64_t seed = 0, int iterations = 48) {
  require(probes.size() >= 3, ErrorCode::invalid_argument, "calibration needs at least 3 probe items");
  auto corr = [&](double noise) {
    return cross_modal_correlation(oracle.with_noise(noise), decoder, probes, reference, Rng(seed, 0xca1b));
  };
  const double clean = corr(0.0);
  require(clean > target_r, ErrorCode::invalid_argument,
          "calibration: noiseless correlation " + std::to_string(clean) + " does not exceed target " +
              std::to_string(target_r));
  const NeuralResponse probe = oracle.forward_noiseless(reference.embedding);
  double hi = std::max(1e-12, std::sqrt(probe.samples.squaredNorm() / static_cast<double>(probe.samples.size())));
  for (int i = 0; i < 80 && corr(hi) > target_r; ++i) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (corr(mid) > target_r ? lo : hi) = mid;
  }
  return oracle.with_noise(0.5 * (lo + hi));
}

}  // namespace mindpilot

#include <gtest/gtest.h>

#include <numbers>
#include <numeric>

#include "mindpilot/features.hpp"
#include "mindpilot/oracle.hpp"

using namespace mindpilot;

namespace {

OracleConfig linear_config(Nonlinearity nl = Nonlinearity::identity) {
  OracleConfig c;
  c.embedding_dim = 24;
  c.hidden = 48;
  c.channels = 5;
  c.timepoints = 250;
  c.nonlinearity = nl;
  c.seed = 21;
  return c;
}

Embedding random_vector(Eigen::Index n, Rng& rng) {
  Embedding e(n);
  for (Eigen::Index i = 0; i < n; ++i) e[i] = rng.normal();
  return e;
}

NeuralResponse single_channel(const Eigen::VectorXd& v, double fs = 250.0) {
  NeuralResponse x;
  x.samples = v.transpose();
  x.sampling_rate = fs;
  return x;
}

}  // namespace

TEST(SemanticEncode, PseudoInverseRecoversEmbedding) {
  const auto oracle = make_oracle(linear_config());
  const auto decoder = SemanticDecoder::from_oracle(oracle);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Embedding e = random_vector(24, rng);
    EXPECT_NEAR(cosine_sim(decoder.encode(oracle.forward_noiseless(e)).values, e), 1.0, 1e-6);
  }
}

TEST(SemanticEncode, NearlyInvertsTanhOracleAtUnitScale) {
  const auto oracle = make_oracle(linear_config(Nonlinearity::tanh));
  const auto decoder = SemanticDecoder::from_oracle(oracle);
  Rng rng(2);
  const Embedding e = random_vector(24, rng).normalized();
  EXPECT_GT(cosine_sim(decoder.encode(oracle.forward_noiseless(e)).values, e), 0.99);
}

TEST(SemanticEncode, LinearAndShapeChecked) {
  const auto oracle = make_oracle(linear_config(Nonlinearity::tanh));
  const auto decoder = SemanticDecoder::from_oracle(oracle);
  Rng rng(3);
  NeuralResponse x = oracle.forward_noiseless(random_vector(24, rng));
  NeuralResponse scaled = x;
  scaled.samples *= -2.5;
  EXPECT_LT((decoder.encode(scaled).values + 2.5 * decoder.encode(x).values).norm(), 1e-9);

  NeuralResponse zero = x;
  zero.samples.setZero();
  EXPECT_EQ(decoder.encode(zero).values.cwiseAbs().maxCoeff(), 0.0);

  NeuralResponse wrong;
  wrong.samples = Eigen::MatrixXd::Zero(4, 250);
  EXPECT_THROW(decoder.encode(wrong), Error);
}

TEST(Psd, SinusoidConcentratesInAlpha) {
  Eigen::VectorXd s(250);
  for (int n = 0; n < 250; ++n) s[n] = std::sin(2.0 * std::numbers::pi * 10.0 * n / 250.0);
  const auto bands = BandSpec::defaults();
  const Eigen::MatrixXd bp = band_powers(single_channel(s), bands);
  const auto alpha = static_cast<Eigen::Index>(*bands.find("alpha"));
  for (Eigen::Index b = 0; b < bp.cols(); ++b)
    if (b != alpha) {
      EXPECT_GE(bp(0, alpha), 10.0 * bp(0, b)) << bands.bands[static_cast<std::size_t>(b)].name;
    }
  const FeatureVector f = psd_encode(single_channel(s), bands);
  EXPECT_EQ(f.kind, FeatureKind::psd);
  EXPECT_EQ(f.values.size(), 5);
}

TEST(Psd, ZeroInputZeroFeature) {
  NeuralResponse x;
  x.samples = Eigen::MatrixXd::Zero(3, 250);
  const FeatureVector f = psd_encode(x, BandSpec::defaults());
  EXPECT_EQ(f.values.size(), 15);
  EXPECT_EQ(f.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Psd, WhiteNoiseProportionalToBandwidth) {
  const auto bands = BandSpec::defaults();
  Rng rng(4);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(5);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd s(250);
    for (int n = 0; n < 250; ++n) s[n] = rng.normal();
    total += band_powers(single_channel(s), bands).row(0).transpose();
  }
  double width_sum = 0.0;
  for (const auto& b : bands.bands) width_sum += b.hi - b.lo;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const double expected = total.sum() * (bands.bands[b].hi - bands.bands[b].lo) / width_sum;
    EXPECT_NEAR(total[static_cast<Eigen::Index>(b)] / expected, 1.0, 0.2) << bands.bands[b].name;
  }
}

TEST(Psd, ParsevalAndBandBound) {
  Rng rng(5);
  Eigen::VectorXd s(250);
  for (int n = 0; n < 250; ++n) s[n] = rng.normal() + 0.3 * std::cos(0.7 * n);
  const Eigen::VectorXd p = periodogram(s, 250.0);
  const Eigen::VectorXd w = hann_window(250);
  const double windowed = (w.array() * s.array()).square().sum() / w.squaredNorm();
  const double df = 250.0 / 250.0;
  EXPECT_NEAR(p.sum() * df, windowed, 1e-9 * windowed);
  const double in_bands = band_powers(single_channel(s), BandSpec::defaults()).sum();
  EXPECT_LE(in_bands, windowed + 1e-9);
}

TEST(Psd, BandOutsideNyquistRejected) {
  BandSpec spec{{{"high", 100, 200}}};
  NeuralResponse x;
  x.samples = Eigen::MatrixXd::Ones(1, 250);
  EXPECT_THROW(psd_encode(x, spec), Error);
  BandSpec overlap{{{"a", 1, 10}, {"b", 8, 20}}};
  EXPECT_THROW(overlap.validate(250.0), Error);
}

TEST(Reward, FixedPointAndRange) {
  const auto oracle = make_oracle(linear_config(Nonlinearity::tanh));
  FeatureEncoder encoder{SemanticDecoder::from_oracle(oracle), BandSpec::defaults()};
  Rng rng(6);
  const Item star{"star", random_vector(24, rng), std::nullopt};
  for (FeatureKind kind : {FeatureKind::semantic, FeatureKind::psd}) {
    const Target target = target_from_item(star, oracle, encoder, kind);
    EXPECT_NEAR(reward(star, oracle.as_function(), encoder, target, rng), 1.0, 1e-12);
    for (int t = 0; t < 20; ++t) {
      const double r = reward({"x", random_vector(24, rng), std::nullopt}, oracle.as_function(), encoder, target, rng);
      EXPECT_TRUE(r >= -1.0 && r <= 1.0);
    }
  }
}

TEST(Reward, DegenerateAndMismatchedTargets) {
  const auto oracle = make_oracle(linear_config());
  FeatureEncoder encoder{SemanticDecoder::from_oracle(oracle), BandSpec::defaults()};
  Rng rng(7);
  const Item item{"x", random_vector(24, rng), std::nullopt};
  const Target zero = Target::from_feature({Eigen::VectorXd::Zero(24), FeatureKind::semantic});
  try {
    reward(item, oracle.as_function(), encoder, zero, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_vector);
  }
  EXPECT_THROW(reward(item, oracle.as_function(), encoder, Target::rating(), rng), Error);
  Target mislabeled = Target::from_feature({Eigen::VectorXd::Ones(24), FeatureKind::semantic});
  mislabeled.kind = FeatureKind::psd;
  EXPECT_THROW(reward(item, oracle.as_function(), encoder, mislabeled, rng), Error);
}

TEST(Reward, NoisyOracleVaries) {
  auto cfg = linear_config();
  cfg.noise_std = 0.05;
  const auto oracle = make_oracle(cfg);
  FeatureEncoder encoder{SemanticDecoder::from_oracle(oracle.with_noise(0.0)), BandSpec::defaults()};
  Rng rng(8);
  const Item star{"star", random_vector(24, rng), std::nullopt};
  const Target target = target_from_item(star, oracle, encoder, FeatureKind::semantic);
  auto fn = make_reward_fn(oracle.as_function(), encoder, target, Rng(9));
  std::vector<double> r;
  for (int t = 0; t < 30; ++t) r.push_back(fn(star));
  EXPECT_GT(stats::stddev(r), 0.0);
}

TEST(Scores, SelfSimilarityAndSignInvariance) {
  const auto oracle = make_oracle(linear_config(Nonlinearity::tanh));
  const auto decoder = SemanticDecoder::from_oracle(oracle);
  Rng rng(10);
  const Item a{"a", random_vector(24, rng), std::nullopt};
  EXPECT_NEAR(score_ss(a, a, oracle, decoder), 1.0, 1e-12);
  EXPECT_NEAR(score_is(a, a, oracle), 1.0, 1e-12);

  NeuralResponse x = oracle.forward_noiseless(a.embedding);
  NeuralResponse flipped = x;
  flipped.samples.row(0) *= -1.0;
  flipped.samples.row(3) *= -1.0;
  EXPECT_LT((channel_power(x) - channel_power(flipped)).norm(), 1e-15);
}

TEST(Scores, RandomPairsSitAtChance) {
  const auto oracle = make_oracle(linear_config());
  const auto decoder = SemanticDecoder::from_oracle(oracle);
  Rng rng(11);
  std::vector<Item> items;
  for (int i = 0; i < 100; ++i) items.push_back({"i" + std::to_string(i), random_vector(24, rng), std::nullopt});
  std::vector<double> paired, permuted;
  for (int i = 0; i < 100; i += 2) paired.push_back(score_ss(items[i], items[i + 1], oracle, decoder));
  // Permutation reference: SS over shuffled pairings.
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::size_t> perm(items.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    for (std::size_t i = 0; i + 1 < perm.size(); i += 2) permuted.push_back(score_ss(items[perm[i]], items[perm[i + 1]], oracle, decoder));
  }
  const double sd = stats::stddev(permuted);
  EXPECT_LT(std::abs(stats::mean(paired) - stats::mean(permuted)), 3.0 * sd / std::sqrt(50.0));
}

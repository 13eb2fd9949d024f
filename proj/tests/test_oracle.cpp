#include <gtest/gtest.h>

#include "mindpilot/features.hpp"
#include "mindpilot/oracle.hpp"
#include "mindpilot/search.hpp"
#include "mindpilot/stats.hpp"

using namespace mindpilot;

namespace {

OracleConfig small_config(std::uint64_t seed = 3) {
  OracleConfig c;
  c.embedding_dim = 16;
  c.hidden = 32;
  c.channels = 4;
  c.timepoints = 50;
  c.seed = seed;
  return c;
}

Embedding random_vector(Eigen::Index n, Rng& rng) {
  Embedding e(n);
  for (Eigen::Index i = 0; i < n; ++i) e[i] = rng.normal();
  return e;
}

}  // namespace

TEST(BrainOracle, ZeroWeightsGiveZeroResponse) {
  const auto oracle = BrainOracle::zeros(small_config());
  Rng rng(0), probe(1);
  const NeuralResponse x = oracle.forward(random_vector(16, probe), rng);
  EXPECT_EQ(x.channels(), 4);
  EXPECT_EQ(x.timepoints(), 50);
  EXPECT_EQ(x.samples.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BrainOracle, ShapeAndDefaults) {
  OracleConfig c;
  c.embedding_dim = 8;
  c.hidden = 8;
  const auto oracle = make_oracle(c);
  Rng rng(0), probe(2);
  const NeuralResponse x = oracle.forward(random_vector(8, probe), rng);
  EXPECT_EQ(x.channels(), 17);
  EXPECT_EQ(x.timepoints(), 250);
  EXPECT_DOUBLE_EQ(x.sampling_rate, 250.0);
  EXPECT_TRUE(x.samples.allFinite());
  try {
    oracle.forward(random_vector(9, probe), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
  }
}

TEST(BrainOracle, DeterministicPerSeed) {
  auto cfg = small_config();
  cfg.noise_std = 0.3;
  const auto a = make_oracle(cfg), b = make_oracle(cfg);
  Rng probe(4);
  const Embedding e = random_vector(16, probe);
  Rng ra(9, 1), rb(9, 1);
  EXPECT_EQ(a.forward(e, ra).samples, b.forward(e, rb).samples);
  EXPECT_EQ(a.forward_noiseless(e).samples, a.forward_noiseless(Embedding(e)).samples);

  const auto other = make_oracle(small_config(4));
  EXPECT_GT((a.forward_noiseless(e).samples - other.forward_noiseless(e).samples).norm(), 1e-6);
}

TEST(BrainOracle, InvalidDimensions) {
  auto cfg = small_config();
  cfg.hidden = 0;
  EXPECT_THROW(make_oracle(cfg), Error);
  cfg = small_config();
  cfg.noise_std = -1.0;
  EXPECT_THROW(make_oracle(cfg), Error);
}

TEST(BrainOracle, ConfigJsonRoundTrip) {
  auto cfg = small_config(11);
  cfg.nonlinearity = Nonlinearity::identity;
  cfg.noise_std = 0.25;
  const Json j = cfg;
  const auto back = j.get<OracleConfig>();
  EXPECT_EQ(Json(back), j);
}

TEST(BrainOracle, CorrelationFallsWithNoise) {
  const auto oracle = make_oracle(small_config());
  const auto decoder = SemanticDecoder::from_oracle(oracle);
  Rng items(5);
  std::vector<Embedding> probes;
  for (int i = 0; i < 100; ++i) probes.push_back(random_vector(16, items));
  const std::vector<double> levels{0.0, 0.02, 0.05, 0.1, 0.2};
  std::vector<double> fidelity;
  for (double noise : levels) {
    const auto noisy = oracle.with_noise(noise);
    Rng rng(6);
    std::vector<double> sims;
    for (const auto& e : probes) sims.push_back(cosine_sim(decoder.encode(noisy.forward(e, rng)).values, e));
    fidelity.push_back(stats::mean(sims));
  }
  EXPECT_LT(stats::spearman(levels, fidelity), 0.0);
  EXPECT_GT(fidelity.front(), fidelity.back());
}

TEST(BrainOracle, CalibrationHitsRequestedCorrelation) {
  const auto oracle = make_oracle(small_config());
  const auto decoder = SemanticDecoder::from_oracle(oracle);
  Rng rng(8);
  std::vector<Item> probes;
  for (int i = 0; i < 60; ++i) probes.push_back({"p" + std::to_string(i), random_vector(16, rng), std::nullopt});
  const Item reference{"ref", random_vector(16, rng), std::nullopt};
  const auto calibrated = calibrate_oracle(oracle, decoder, probes, reference, 0.23, 1);
  EXPECT_GT(calibrated.config().noise_std, 0.0);
  EXPECT_NEAR(cross_modal_correlation(calibrated, decoder, probes, reference, Rng(1, 0xca1b)), 0.23, 1e-3);
}

TEST(SyntheticRater, Examples) {
  Rng rng(0);
  RaterConfig perfect{Eigen::Vector3d(1, 2, 3), 0.0, {0.0, 1.0}};
  EXPECT_DOUBLE_EQ(synthetic_rate({"a", Eigen::Vector3d(1, 2, 3), std::nullopt}, perfect, rng), 1.0);

  RaterConfig mid{Eigen::Vector2d(1, 0), 0.0, {0.5, 0.5}};
  EXPECT_DOUBLE_EQ(synthetic_rate({"b", Eigen::Vector2d(0, 3), std::nullopt}, mid, rng), 0.5);
  EXPECT_DOUBLE_EQ(synthetic_rate({"c", Eigen::Vector2d(-1, 0), std::nullopt}, mid, rng), 0.0);
}

TEST(SyntheticRater, NoiseStandardDeviation) {
  Rng rng(1);
  RaterConfig cfg{Eigen::Vector2d(1, 0), 0.05, {0.5, 0.5}};
  const Item item{"x", Eigen::Vector2d(0, 1), std::nullopt};
  std::vector<double> r;
  for (int i = 0; i < 1000; ++i) r.push_back(synthetic_rate(item, cfg, rng));
  EXPECT_NEAR(stats::stddev(r), 0.05, 0.01);
  EXPECT_NEAR(stats::mean(r), 0.5, 0.01);
  for (double v : r) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(SyntheticRater, ClampsAndValidates) {
  Rng rng(2);
  RaterConfig loud{Eigen::Vector2d(1, 0), 5.0, {0.5, 0.5}};
  for (int i = 0; i < 200; ++i) {
    const double v = synthetic_rate({"x", Eigen::Vector2d(1, 1), std::nullopt}, loud, rng);
    EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
  RaterConfig decreasing{Eigen::Vector2d(1, 0), 0.0, {1.0, -1.0}};
  EXPECT_THROW(synthetic_rate({"x", Eigen::Vector2d(1, 1), std::nullopt}, decreasing, rng), Error);
}

// Optimizers see a plain item -> reward function; any callable works,
// including one with no oracle behind it at all.
TEST(BlackBox, SearchAcceptsAnyResponseFunction) {
  std::vector<Item> items;
  for (int i = 0; i < 8; ++i) items.push_back({"i" + std::to_string(i), Eigen::Vector2d(std::cos(i), std::sin(i)), std::nullopt});
  const Catalog catalog(items);

  ResponseFn fake = [](const Item& item, Rng&) {
    NeuralResponse x;
    x.samples = Eigen::MatrixXd::Constant(2, 3, item.embedding[0]);
    return x;
  };
  const Eigen::VectorXd target = Eigen::VectorXd::Ones(6);
  const auto decoder = SemanticDecoder::from_matrix(Eigen::MatrixXd::Identity(6, 6), 2, 3);
  FeatureEncoder encoder{decoder, BandSpec::defaults()};
  auto fn = make_reward_fn(fake, encoder, Target::from_feature({target, FeatureKind::semantic}), Rng(1));
  int calls = 0;
  RewardFn counted = [&](const Item& item) {
    ++calls;
    const double r = item.embedding[0] == 0.0 ? 0.0 : fn(item);
    return r;
  };
  SearchConfig cfg;
  cfg.batch_size = 4;
  cfg.max_iterations = 3;
  const auto trace = run_search(catalog, cfg, counted, 0);
  EXPECT_EQ(calls, 12);
  EXPECT_EQ(trace.steps.size(), 3u);
}

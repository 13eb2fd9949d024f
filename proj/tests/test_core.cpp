#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <array>
#include <functional>

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/core/rng.hpp"

using namespace mindpilot;

namespace {

Embedding vec(std::initializer_list<double> v) {
  Embedding e(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) e[i++] = x;
  return e;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::io;
}

}  // namespace

TEST(CosineSim, Examples) {
  EXPECT_DOUBLE_EQ(cosine_sim(vec({3, -1, 2}), vec({3, -1, 2})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_sim(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_NEAR(cosine_sim(vec({1, 2, 2}), vec({2, 1, 2})), 8.0 / 9.0, 1e-15);
}

TEST(CosineSim, Errors) {
  EXPECT_EQ(code_of([] { cosine_sim(vec({0, 0}), vec({1, 0})); }), ErrorCode::degenerate_vector);
  EXPECT_EQ(code_of([] { cosine_sim(vec({1, 0}), vec({1, 0, 0})); }), ErrorCode::shape_mismatch);
}

TEST(CosineSim, SymmetricAndScaleInvariant) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    Embedding a(16), b(16);
    for (int i = 0; i < 16; ++i) a[i] = rng.normal(), b[i] = rng.normal();
    const double lambda = rng.uniform(0.01, 100.0);
    EXPECT_DOUBLE_EQ(cosine_sim(a, b), cosine_sim(b, a));
    EXPECT_NEAR(cosine_sim(lambda * a, b), cosine_sim(a, b), 1e-12);
  }
}

TEST(Softmax, Examples) {
  const ProbTable p = softmax(vec({0, 0, std::log(2.0)}));
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
  EXPECT_NEAR(p[2], 0.5, 1e-15);
  const ProbTable u = softmax(vec({7, 7, 7}));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(u[i], 1.0 / 3.0, 1e-15);
  const ProbTable big = softmax(vec({1000, 1001}));
  const double e = std::exp(1.0);
  EXPECT_NEAR(big[0], 1.0 / (1.0 + e), 1e-15);
  EXPECT_NEAR(big[1], e / (1.0 + e), 1e-15);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    ScoreTable s(20);
    for (int i = 0; i < 20; ++i) s[i] = rng.normal(0.0, 50.0);
    const double tau = std::exp(rng.uniform(-5.0, 5.0));
    const ProbTable p = softmax(s, tau);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    const ProbTable q = softmax((s.array() + rng.uniform(-100.0, 100.0)).matrix(), tau);
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Softmax, Errors) {
  EXPECT_EQ(code_of([] { softmax(vec({0, std::nan("")})); }), ErrorCode::non_finite);
  EXPECT_EQ(code_of([] { softmax(vec({0, 1}), 0.0); }), ErrorCode::invalid_argument);
}

TEST(Roulette, PointMassAndZeroMassExclusion) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    EXPECT_EQ(roulette_sample(vec({1, 0, 0}), 1, rng), std::vector<std::size_t>{0});
    auto pair = roulette_sample(vec({0.5, 0.5, 0}), 2, rng);
    std::sort(pair.begin(), pair.end());
    EXPECT_EQ(pair, (std::vector<std::size_t>{0, 1}));
  }
  EXPECT_EQ(code_of([&] { roulette_sample(vec({0.5, 0.5, 0}), 3, rng); }), ErrorCode::invalid_argument);
}

TEST(Roulette, UniformFrequenciesPassChiSquare) {
  Rng rng(4);
  std::array<int, 4> counts{};
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) ++counts[roulette_sample(vec({0.25, 0.25, 0.25, 0.25}), 1, rng)[0]];
  double chi2 = 0.0;
  for (int c : counts) {
    EXPECT_NEAR(c / double(draws), 0.25, 0.02);
    chi2 += (c - draws / 4.0) * (c - draws / 4.0) / (draws / 4.0);
  }
  EXPECT_GT(boost::math::cdf(boost::math::complement(boost::math::chi_squared(3), chi2)), 1e-3);
}

TEST(Roulette, SequentialRenormalization) {
  // P(first = 0, second = 1) = p0 * p1 / (1 - p0).
  Rng rng(5);
  const ProbTable p = vec({0.5, 0.3, 0.2});
  int hits = 0;
  const int draws = 40000;
  for (int t = 0; t < draws; ++t) {
    const auto s = roulette_sample(p, 2, rng);
    hits += s[0] == 0 && s[1] == 1;
  }
  EXPECT_NEAR(hits / double(draws), 0.5 * 0.3 / 0.5, 0.01);
}

TEST(Roulette, LogWeightsSurviveExtremeRange) {
  Rng rng(6);
  const std::vector<double> logw{-1e5, 0.0, -2e5, -1.0};
  const auto s = roulette_sample_log(logw, 4, rng);
  std::vector<std::size_t> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(s[2], 0u);
  EXPECT_EQ(s[3], 2u);
}

TEST(Roulette, Reproducible) {
  Rng a(42, 7), b(42, 7);
  const ProbTable p = softmax(vec({0.1, 0.5, 0.2, 0.9, 0.3, 0.0}));
  for (int t = 0; t < 50; ++t) EXPECT_EQ(roulette_sample(p, 3, a), roulette_sample(p, 3, b));
}

TEST(Rng, StreamsAreIndependentAndReproducible) {
  Rng a(1, 0), b(1, 0), c(1, 1);
  bool differs = false;
  for (int i = 0; i < 20; ++i) {
    const auto x = a.bits();
    EXPECT_EQ(x, b.bits());
    differs |= x != c.bits();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a, b);
}

TEST(Catalog, Invariants) {
  EXPECT_EQ(code_of([] { Catalog({{"a", vec({1, 0}), std::nullopt}}); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([] { Catalog({{"a", vec({1, 0}), std::nullopt}, {"a", vec({0, 1}), std::nullopt}}); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([] { Catalog({{"a", vec({1, 0}), std::nullopt}, {"b", vec({0, 1, 0}), std::nullopt}}); }),
            ErrorCode::shape_mismatch);
  EXPECT_EQ(code_of([] { Catalog({{"a", vec({1, 0}), std::nullopt}, {"b", vec({0, 0}), std::nullopt}}); }),
            ErrorCode::degenerate_vector);
  Catalog c({{"a", vec({1, 0}), std::nullopt}, {"b", vec({0, 2}), std::nullopt}});
  EXPECT_EQ(c.index_of("b"), 1u);
  EXPECT_FALSE(c.index_of("z"));
  EXPECT_DOUBLE_EQ(c.similarity(0, 1), 0.0);
}

TEST(Catalog, SimilarityRowsTrackGrowth) {
  Catalog c({{"a", vec({1, 0}), std::nullopt}, {"b", vec({0, 1}), std::nullopt}});
  EXPECT_EQ(c.exp_similarity_row(0).size(), 2);
  c.append({"c", vec({1, 1}), std::nullopt});
  const auto& row = c.exp_similarity_row(0);
  ASSERT_EQ(row.size(), 3);
  EXPECT_NEAR(row[2], std::exp(1.0 / std::sqrt(2.0)), 1e-15);
  Catalog nc({{"a", vec({1, 0}), std::nullopt}, {"b", vec({0, 1}), std::nullopt}}, SimilarityCache::none);
  EXPECT_NEAR(nc.exp_similarity_row(1)[1], std::exp(1.0), 1e-15);
}

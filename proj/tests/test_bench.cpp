#include <gtest/gtest.h>

#include <filesystem>

#include "mindpilot/bench.hpp"

using namespace mindpilot;
using namespace mindpilot::bench;

namespace fs = std::filesystem;

namespace {

ExperimentSpec small(Scenario sc) {
  ExperimentSpec s = default_spec(sc);
  s.seeds = {0, 1, 2};
  s.catalog.clusters = 10;
  s.catalog.dim = 16;
  s.oracle.embedding_dim = 16;
  s.oracle.hidden = 32;
  s.oracle.timepoints = 250;
  s.corpus_size = 40;
  s.threads = 2;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mindpilot-bench-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(ClusterCatalog, ShapeAndLabels) {
  ClusterCatalogConfig cfg;
  Rng rng(0);
  const SyntheticCatalog data = make_cluster_catalog(cfg, rng);
  EXPECT_EQ(data.catalog.size(), 600u);
  EXPECT_EQ(data.catalog.dim(), 64);
  EXPECT_EQ(data.catalog[13].id, "c1-m1");
  EXPECT_EQ(data.cluster[13], 1u);
  for (const auto& item : data.catalog.items()) EXPECT_NEAR(item.embedding.norm(), 1.0, 1e-12);
  // Members sit closer to their own cluster than to others on average.
  double within = 0.0, across = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    within += data.catalog.similarity(0, i) / 12.0;
    across += data.catalog.similarity(0, 12 * (i + 1)) / 12.0;
  }
  EXPECT_GT(within, across);
  Rng again(0);
  EXPECT_EQ(make_cluster_catalog(cfg, again).catalog[599].embedding, data.catalog[599].embedding);
}

TEST(ExperimentSpec, JsonRoundTrip) {
  ExperimentSpec s = default_spec(Scenario::efficiency);
  s.calibrate_r = 0.23;
  s.rater_target = RaterTarget::item;
  s.budgets = {5, 7};
  const Json j = s;
  const ExperimentSpec back = spec_from_json(Json::parse(j.dump()));
  EXPECT_EQ(Json(back), j);
  EXPECT_EQ(spec_from_json(Json::object(), Scenario::grid).scenario, Scenario::grid);
  EXPECT_EQ(spec_from_json(Json{{"scenario", "rate-sim"}}).scenario, Scenario::rating_sim);
  EXPECT_EQ(spec_from_json(Json{{"catalog", {{"dim", 8}}}}).oracle.embedding_dim, 8);
}

TEST(ExperimentSpec, ValidationErrors) {
  ExperimentSpec s = default_spec(Scenario::grid);
  s.catalog.clusters = 0;
  EXPECT_THROW(s.validate(), Error);
  s = default_spec(Scenario::grid);
  s.alphas = {1.5};
  EXPECT_THROW(s.validate(), Error);
  s = default_spec(Scenario::retrieval);
  s.seeds.clear();
  EXPECT_THROW(s.validate(), Error);
  s = default_spec(Scenario::retrieval);
  s.oracle.embedding_dim = 3;
  EXPECT_THROW(s.validate(), Error);
  s = default_spec(Scenario::efficiency);
  s.budgets = {1};
  EXPECT_THROW(s.validate(), Error);
  EXPECT_THROW(scenario_from_string("optimize"), Error);
  EXPECT_THROW(spec_from_json(Json{{"rater", {{"target", "face"}}}}), Error);
}

TEST(SeedList, Forms) {
  EXPECT_EQ(parse_seed_list("0,3,7"), (std::vector<std::uint64_t>{0, 3, 7}));
  EXPECT_EQ(parse_seed_list("2-4"), (std::vector<std::uint64_t>{2, 3, 4}));
  EXPECT_EQ(parse_seed_list("0-1,10"), (std::vector<std::uint64_t>{0, 1, 10}));
  EXPECT_THROW(parse_seed_list("5-2"), Error);
  EXPECT_THROW(parse_seed_list("x"), Error);
  EXPECT_THROW(parse_seed_list(""), Error);
}

TEST(MapSeeds, KeepsOrderAndRethrows) {
  const std::vector<std::uint64_t> seeds{5, 1, 9, 3, 7};
  const auto out = map_seeds(seeds, 3, [](std::uint64_t s) { return s * 10; });
  EXPECT_EQ(out, (std::vector<std::uint64_t>{50, 10, 90, 30, 70}));
  EXPECT_THROW(map_seeds(seeds, 2,
                         [](std::uint64_t s) -> int {
                           if (s == 9) throw std::runtime_error("boom");
                           return 0;
                         }),
               std::runtime_error);
}

TEST(Metrics, SelfAndKindMismatch) {
  const ExperimentSpec spec = small(Scenario::generation);
  const OracleContext ctx = make_context(spec);
  Rng rng(1);
  const Item item{"t", random_unit(16, rng), std::nullopt};
  for (FeatureKind kind : {FeatureKind::semantic, FeatureKind::psd}) {
    const Target target = target_from_item(item, ctx.oracle, ctx.encoder, kind);
    const Metrics m = compute_metrics(item, item, ctx, target);
    EXPECT_NEAR(m.ss, 1.0, 1e-12);
    EXPECT_NEAR(m.is, 1.0, 1e-12);
    EXPECT_EQ(m.l1, 0.0);
  }
  Target mismatched = target_from_item(item, ctx.oracle, ctx.encoder, FeatureKind::semantic);
  mismatched.kind = FeatureKind::psd;
  mismatched.feature->kind = FeatureKind::psd;
  EXPECT_THROW(compute_metrics(item, item, ctx, mismatched), Error);
  EXPECT_THROW(compute_metrics(item, item, ctx, Target::rating()), Error);
}

TEST(Retrieval, SmallRunShape) {
  const ExperimentSpec spec = small(Scenario::retrieval);
  const RetrievalReport r = run_retrieval_experiment(spec);
  ASSERT_EQ(r.seeds.size(), 3u);
  for (const auto& s : r.seeds) {
    EXPECT_EQ(s.step_similarity.size(), spec.search.max_iterations);
    EXPECT_GE(s.step_best(), s.step1());
  }
  const io::CsvTable t = retrieval_table(r);
  EXPECT_EQ(t.rows().size(), 3 * spec.search.max_iterations);
  // Same spec, same numbers, whatever the thread count.
  ExperimentSpec serial = spec;
  serial.threads = 1;
  EXPECT_EQ(retrieval_table(run_retrieval_experiment(serial)).str(), t.str());
}

TEST(Grid, BitReproducibleAndParses) {
  ExperimentSpec spec = small(Scenario::grid);
  spec.seeds = {0, 1};
  const GridReport a = run_grid(spec), b = run_grid(spec);
  EXPECT_EQ(a.cells, b.cells);
  const auto rows = io::parse_csv(a.matrix().str());
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0][0], "alpha\\beta");
  EXPECT_EQ(rows[0].size(), 6u);
  EXPECT_EQ(rows[1][0], "0.10000000000000001");
  EXPECT_NE(rows[1][1].find("±"), std::string::npos);
  EXPECT_EQ(io::parse_csv(a.long_table(spec.seeds).str()).size(), 1u + 25 * 2);
}

TEST(Generation, StepBestBeatsRandom) {
  const ExperimentSpec spec = small(Scenario::generation);
  const GenerationReport r = run_generation_experiment(spec);
  for (const auto& s : r.seeds) {
    EXPECT_EQ(s.step.size(), spec.evolve.max_iterations + 1);
    EXPECT_GE(s.best.best.ss, s.step.front().ss - 1e-12);
    EXPECT_LE(s.best.best.l1, s.random.l1);
  }
}

TEST(Efficiency, TableLayoutAndBudgets) {
  ExperimentSpec spec = small(Scenario::efficiency);
  spec.seeds = {0, 1};
  spec.budgets = {5, 12};
  const EfficiencyReport r = run_efficiency(spec);
  EXPECT_EQ(r.runs.size(), 2 * 5 * 2u);
  for (const auto& run : r.runs) EXPECT_EQ(run.queries, run.budget);
  const auto rows = io::parse_csv(r.table().str());
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"method", "score@5", "time_s@5", "score@12", "time_s@12"}));
  EXPECT_EQ(rows[1][0], "mindpilot-offline");
  EXPECT_THROW(run_efficiency_once(make_context(spec), spec, "simplex", 5, 0), Error);
}

TEST(RateSim, DirectionRaterImproves) {
  ExperimentSpec spec = small(Scenario::rating_sim);
  const RatingReport r = run_rate_sim(spec);
  ASSERT_EQ(r.seeds.size(), 3u);
  for (const auto& s : r.seeds) {
    EXPECT_EQ(s.steps.size(), spec.search.max_iterations);
    for (const auto& step : s.steps)
      for (double v : step.ratings) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
  EXPECT_EQ(run_rate_sim(spec).seeds[1].steps[4].ratings, r.seeds[1].steps[4].ratings);
}

TEST(Outputs, FilesAndSummary) {
  ExperimentSpec spec = small(Scenario::retrieval);
  spec.out_dir = scratch("retrieval").string();
  run_scenario(spec);
  for (const char* f : {"report.csv", "trace.jsonl", "spec.json", "summary.json"})
    EXPECT_TRUE(fs::exists(fs::path(spec.out_dir) / f)) << f;
  const Json summary = io::read_json(fs::path(spec.out_dir) / "summary.json");
  EXPECT_EQ(summary.at("scenario"), "retrieval");
  EXPECT_EQ(summary.at("spec"), Json(spec));
  EXPECT_EQ(io::read_jsonl(fs::path(spec.out_dir) / "trace.jsonl").size(), 3 * spec.search.max_iterations);
  EXPECT_EQ(spec_from_json(io::read_json(fs::path(spec.out_dir) / "spec.json")).search.top_k, spec.search.top_k);
  fs::remove_all(spec.out_dir);

  spec = small(Scenario::grid);
  spec.seeds = {0};
  spec.alphas = {0.1, 0.5};
  spec.betas = {0.1};
  spec.out_dir = scratch("grid").string();
  run_scenario(spec);
  EXPECT_TRUE(fs::exists(fs::path(spec.out_dir) / "grid_long.csv"));
  fs::remove_all(spec.out_dir);
}

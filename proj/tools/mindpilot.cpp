// Experiment runner: one subcommand per scenario, plus session-log replay.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "mindpilot/bench.hpp"
#include "mindpilot/service.hpp"

namespace mp = mindpilot;
namespace bench = mindpilot::bench;

namespace {

struct Options {
  std::string config;
  std::string seeds;
  std::string out;
  std::size_t threads = 0;
  bool threads_set = false;
};

bench::ExperimentSpec load_spec(bench::Scenario scenario, const Options& opt) {
  mp::Json j = opt.config.empty() ? mp::Json::object() : mp::io::read_json(opt.config);
  require(j.is_object(), mp::ErrorCode::invalid_argument, "config '" + opt.config + "' must hold a JSON object");
  if (j.contains("scenario"))
    require(bench::scenario_from_string(j.at("scenario").get<std::string>()) == scenario, mp::ErrorCode::invalid_argument,
            "config scenario '" + j.at("scenario").get<std::string>() + "' does not match the subcommand");
  j["scenario"] = bench::to_string(scenario);
  bench::ExperimentSpec spec = bench::spec_from_json(j, scenario);
  if (!opt.seeds.empty()) spec.seeds = bench::parse_seed_list(opt.seeds);
  if (!opt.out.empty()) spec.out_dir = opt.out;
  if (spec.out_dir.empty()) spec.out_dir = "runs/" + bench::to_string(scenario);
  if (opt.threads_set) spec.threads = opt.threads;
  return spec;
}

void print_summary(const bench::ExperimentSpec& spec, const mp::Json& s) {
  auto ms = [](const mp::Json& j) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f±%.4f", j.at("mean").get<double>(), j.at("std").get<double>());
    return std::string(buf);
  };
  switch (spec.scenario) {
    case bench::Scenario::retrieval:
      std::printf("random %s  step-1 %s  step-best %s  p=%.3g  cluster-hit %.2f\n", ms(s["random"]).c_str(),
                  ms(s["step1"]).c_str(), ms(s["step_best"]).c_str(), s["p_value"].get<double>(),
                  s["cluster_hit_rate"].get<double>());
      break;
    case bench::Scenario::generation:
      std::printf("SS random %s  step-1 %s  step-best %s  L1 random %s  step-best %s\n", ms(s["random"]["ss"]).c_str(),
                  ms(s["step1"]["ss"]).c_str(), ms(s["step_best"]["ss"]).c_str(), ms(s["random"]["l1"]).c_str(),
                  ms(s["step_best"]["l1"]).c_str());
      break;
    case bench::Scenario::grid:
      std::printf("%zu cells\n", s["cells"].size());
      break;
    case bench::Scenario::efficiency:
      for (const auto& [method, per] : s["methods"].items()) {
        std::printf("%-22s", method.c_str());
        for (const auto& [budget, cell] : per.items())
          std::printf("  @%s %s (%.4fs)", budget.c_str(), ms(cell["score"]).c_str(), cell["seconds"]["mean"].get<double>());
        std::printf("\n");
      }
      break;
    case bench::Scenario::rating_sim: {
      const auto& steps = s["mean_rating_per_step"];
      std::printf("mean rating step-1 %s  step-%zu %s  improved %.2f\n", ms(steps.front()).c_str(), steps.size(),
                  ms(steps.back()).c_str(), s["improved_fraction"].get<double>());
      break;
    }
  }
}

int run(bench::Scenario scenario, const Options& opt) {
  const auto spec = load_spec(scenario, opt);
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = bench::run_scenario(spec);
  print_summary(spec, out.summary);
  std::printf("wrote %s (%zu seeds, %.2fs)\n", spec.out_dir.c_str(), spec.seeds.size(),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MindPilot experiment runner"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment spec (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seeds", opt.seeds, "seed list, e.g. 0-19 or 1,4,9");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)")->each([&](const std::string&) {
      opt.threads_set = true;
    });
  };
  const std::pair<const char*, bench::Scenario> scenarios[] = {
      {"retrieval", bench::Scenario::retrieval},   {"generate", bench::Scenario::generation},
      {"grid", bench::Scenario::grid},             {"efficiency", bench::Scenario::efficiency},
      {"rate-sim", bench::Scenario::rating_sim},
  };
  std::optional<bench::Scenario> chosen;
  for (const auto& [name, sc] : scenarios) {
    auto* sub = app.add_subcommand(name, "run the " + bench::to_string(sc) + " experiment");
    add_common(sub);
    sub->callback([&chosen, sc = sc] { chosen = sc; });
  }

  std::string log_path, service_config;
  auto* replay = app.add_subcommand("replay", "replay a session log and print its state digest");
  replay->add_option("log", log_path, "session JSONL log")->required();
  replay->add_option("--config", service_config, "service config (JSON), for corpus resolution");

  CLI11_PARSE(app, argc, argv);
  try {
    if (chosen) return run(*chosen, opt);
    mp::service::ServiceConfig cfg;
    if (!service_config.empty()) cfg = mp::io::read_json(service_config).get<mp::service::ServiceConfig>();
    const auto r = mp::service::replay_log(log_path, cfg);
    std::printf("%s steps=%zu digest=%s done=%s\n", r.session->id().c_str(), r.steps, r.session->digest().c_str(),
                r.session->done() ? "true" : "false");
    return 0;
  } catch (const mp::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(mp::to_string(e.code())).c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 1;
}

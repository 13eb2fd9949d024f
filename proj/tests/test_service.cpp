#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <thread>

#include "mindpilot/service.hpp"

using namespace mindpilot;
using namespace mindpilot::service;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mindpilot-svc-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

Json synthetic(std::uint64_t seed = 3) {
  return Json{{"synthetic", {{"clusters", 10}, {"per_cluster", 6}, {"dim", 16}}}, {"seed", seed}};
}

ServiceConfig config(const std::string& name) {
  ServiceConfig c;
  c.data_dir = scratch(name).string();
  c.port = 0;
  return c;
}

Json ratings_for(const Json& batch, double value) {
  Json r = Json::object();
  for (const auto& item : batch.at("items")) r[item.at("id").get<std::string>()] = value;
  return r;
}

Json ratings_by(const Json& batch, const std::function<double(std::size_t)>& f) {
  Json r = Json::object();
  std::size_t i = 0;
  for (const auto& item : batch.at("items")) r[item.at("id").get<std::string>()] = f(i++);
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::io;
}

}  // namespace

TEST(Service, CreateGivesFirstBatch) {
  Service svc(config("create"));
  const Json a = svc.create_session({{"corpus", synthetic()}, {"seed", 7}});
  const Json b = svc.create_session({{"corpus", synthetic()}, {"seed", 7}});
  EXPECT_EQ(a.at("batch").at("items").size(), 10u);
  EXPECT_EQ(a.at("iteration"), 0);
  EXPECT_EQ(a.at("state"), "pending");
  EXPECT_EQ(a.at("mode"), "mental-match");
  EXPECT_NE(a.at("session_id"), b.at("session_id"));
  EXPECT_EQ(a.at("batch"), b.at("batch"));
  EXPECT_NEAR(a.at("entropy").get<double>(), std::log(60.0), 1e-12);
  EXPECT_TRUE(fs::exists(svc.log_path(a.at("session_id").get<std::string>())));
}

TEST(Service, CreateErrors) {
  Service svc(config("create-errors"));
  EXPECT_EQ(code_of([&] { svc.create_session({{"corpus", synthetic()}, {"mode", "dream"}}); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { svc.create_session({{"corpus", "nowhere/manifest.json"}}); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { svc.create_session({{"seed", 1}}); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { svc.create_session({{"corpus", synthetic()}, {"config", {{"batch_size", 500}}}}); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { svc.create_session({{"corpus", synthetic()}, {"engine", "annealing"}}); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { svc.get_state("0123abcd"); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { svc.get_state("../etc"); }), ErrorCode::not_found);
}

TEST(Service, ZeroRatingsLowerScoresAndSessionFinishes) {
  Service svc(config("zero"));
  const Json created = svc.create_session({{"corpus", synthetic()}, {"seed", 1}});
  const std::string id = created.at("session_id");
  const auto session = svc.find(id);
  const Json before = session->canonical_state().at("engine").at("scores");
  Json batch = svc.get_batch(id);
  const auto pending = session->pending();
  svc.submit_ratings(id, {{"ratings", ratings_for(batch, 0.0)}});
  const Json after = session->canonical_state().at("engine").at("scores");
  const Catalog cat = resolve_corpus(synthetic(), svc.config());
  for (const auto& item : pending) {
    const std::size_t i = *cat.index_of(item.id);
    EXPECT_LT(after[i].get<double>(), before[i].get<double>()) << item.id;
  }
  for (std::size_t k = 1; k < 10; ++k) {
    batch = svc.get_batch(id);
    EXPECT_EQ(batch.at("iteration"), k);
    const Json state = svc.submit_ratings(id, {{"ratings", ratings_for(batch, 0.5)}, {"iteration", k}});
    EXPECT_EQ(state.at("iteration"), k + 1);
  }
  const Json state = svc.get_state(id);
  EXPECT_TRUE(state.at("done").get<bool>());
  EXPECT_EQ(state.at("state"), "done");
  EXPECT_EQ(state.at("mean_ratings").size(), 10u);
  EXPECT_EQ(state.at("mean_ratings")[0], 0.0);
  EXPECT_TRUE(svc.get_batch(id).at("items").empty());
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", Json::object()}}); }), ErrorCode::conflict);
}

TEST(Service, BadRatingsLeaveSessionUnchanged) {
  Service svc(config("bad-ratings"));
  const std::string id = svc.create_session({{"corpus", synthetic()}}).at("session_id");
  const auto session = svc.find(id);
  const std::string digest = session->digest();
  const Json batch = svc.get_batch(id);

  Json out_of_range = ratings_for(batch, 0.5);
  out_of_range[batch.at("items")[3].at("id").get<std::string>()] = 1.5;
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", out_of_range}}); }), ErrorCode::invalid_argument);

  Json partial = ratings_for(batch, 0.5);
  partial.erase(batch.at("items")[0].at("id").get<std::string>());
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", partial}}); }), ErrorCode::invalid_argument);

  Json wrong_id = partial;
  wrong_id["not-in-batch"] = 0.5;
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", wrong_id}}); }), ErrorCode::invalid_argument);

  Json nan = ratings_for(batch, 0.5);
  nan[batch.at("items")[1].at("id").get<std::string>()] = "high";
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", nan}}); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"score", 1}}); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", ratings_for(batch, 0.5)}, {"iteration", 4}}); }),
            ErrorCode::conflict);
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", ratings_for(batch, 0.5)}, {"iteration", -1}}); }),
            ErrorCode::invalid_argument);

  EXPECT_EQ(session->digest(), digest);
  EXPECT_EQ(svc.get_state(id).at("iteration"), 0);
  EXPECT_EQ(io::read_jsonl(svc.log_path(id)).size(), 1u);
}

TEST(Service, ConcurrentSubmissionConflicts) {
  Service svc(config("conflict"));
  const std::string id = svc.create_session({{"corpus", synthetic()}}).at("session_id");
  const Json batch = svc.get_batch(id);
  {
    std::lock_guard busy(svc.find(id)->mutex());
    std::thread other([&] {
      EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", ratings_for(batch, 0.5)}}); }),
                ErrorCode::conflict);
    });
    other.join();
  }
  // Readers never block on a held mutation lock.
  EXPECT_EQ(svc.submit_ratings(id, {{"ratings", ratings_for(batch, 0.5)}, {"iteration", 0}}).at("iteration"), 1);
  EXPECT_EQ(code_of([&] { svc.submit_ratings(id, {{"ratings", ratings_for(batch, 0.5)}, {"iteration", 0}}); }),
            ErrorCode::conflict);
}

TEST(Service, EvictionAndLazyRestore) {
  ServiceConfig cfg = config("evict");
  cfg.idle_timeout_s = 60;
  Service svc(cfg);
  const std::string id = svc.create_session({{"corpus", synthetic()}, {"seed", 5}}).at("session_id");
  for (std::size_t k = 0; k < 3; ++k) {
    const Json batch = svc.get_batch(id);
    svc.submit_ratings(id, {{"ratings", ratings_by(batch, [k](std::size_t i) { return 0.1 * ((i + k) % 10); })}});
  }
  const std::string digest = svc.find(id)->digest();
  const Json state = svc.get_state(id);
  EXPECT_EQ(svc.evict_idle(), 0u);
  EXPECT_EQ(svc.evict_idle(std::chrono::steady_clock::now() + std::chrono::minutes(2)), 1u);
  EXPECT_FALSE(svc.loaded(id));
  EXPECT_EQ(svc.get_state(id), state);
  EXPECT_TRUE(svc.loaded(id));
  EXPECT_EQ(svc.find(id)->digest(), digest);

  // A fresh process over the same data directory sees the same session.
  Service other(cfg);
  EXPECT_EQ(other.get_state(id), state);
  const Json batch = other.get_batch(id);
  EXPECT_EQ(batch, svc.get_batch(id));
}

TEST(Replay, DigestsMatchEveryStep) {
  Service svc(config("replay"));
  const std::string id =
      svc.create_session({{"corpus", synthetic()}, {"engine", "evolve"}, {"seed", 2}}).at("session_id");
  while (!svc.get_state(id).at("done").get<bool>()) {
    const Json batch = svc.get_batch(id);
    svc.submit_ratings(id, {{"ratings", ratings_by(batch, [](std::size_t i) { return 1.0 / (1.0 + i); })}});
  }
  const auto records = io::read_jsonl(svc.log_path(id));
  EXPECT_EQ(records.size(), 1 + svc.find(id)->total_steps());
  const ReplayResult r = replay_log(svc.log_path(id), svc.config());
  EXPECT_EQ(r.steps, records.size() - 1);
  EXPECT_EQ(r.session->digest(), svc.find(id)->digest());
  EXPECT_EQ(r.logged_digest, records.back().at("digest"));

  // A tampered rating diverges at that step.
  fs::path bad = fs::path(svc.config().data_dir) / "tampered.jsonl";
  {
    io::JsonlWriter w(bad, true);
    for (std::size_t k = 0; k < records.size(); ++k) {
      Json rec = records[k];
      if (k == 2) rec["ratings"][0] = 0.123;
      w.write(rec);
    }
  }
  EXPECT_EQ(code_of([&] { replay_log(bad, svc.config()); }), ErrorCode::conflict);
}

TEST(Service, EvolveSessionGrowsCatalog) {
  Service svc(config("evolve"));
  const Json created = svc.create_session({{"corpus", synthetic()}, {"engine", "evolve"}});
  const std::string id = created.at("session_id");
  EXPECT_EQ(created.at("engine"), "evolve");
  EXPECT_EQ(created.at("batch").at("items").size(), svc.config().evolve.seed_count);
  svc.submit_ratings(id, {{"ratings", ratings_by(created.at("batch"), [](std::size_t i) { return i == 0 ? 1.0 : 0.0; })}});
  const Json next = svc.get_batch(id);
  EXPECT_EQ(next.at("items")[0].at("id").get<std::string>().rfind("gen-", 0), 0u);
}

TEST(Http, EndToEnd) {
  Server server(config("http"));
  const int port = server.bind();
  std::thread serving([&] { server.serve(); });
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Post("/sessions", Json{{"corpus", synthetic()}, {"seed", 4}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  const Json created = Json::parse(res->body);
  const std::string id = created.at("session_id");

  res = cli.Get("/sessions/" + id + "/batch");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const Json batch = Json::parse(res->body);
  EXPECT_EQ(batch.at("iteration"), 0);

  res = cli.Post("/sessions/" + id + "/ratings", Json{{"ratings", ratings_for(batch, 0.25)}}.dump(),
                 "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(Json::parse(res->body).at("iteration"), 1);

  res = cli.Post("/sessions/" + id + "/ratings", Json{{"ratings", ratings_for(batch, 0.25)}, {"iteration", 0}}.dump(),
                 "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(Json::parse(res->body).at("code"), "conflict");

  res = cli.Post("/sessions/" + id + "/ratings", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = cli.Post("/sessions", Json{{"corpus", synthetic()}, {"mode", "dream"}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = cli.Get("/sessions/ffff/state");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  res = cli.Get("/sessions/" + id + "/state");
  ASSERT_TRUE(res);
  const Json state = Json::parse(res->body);
  EXPECT_EQ(state.at("mean_ratings"), Json::array({0.25}));
  EXPECT_FALSE(state.contains("batch"));

  server.stop();
  serving.join();
}

TEST(ServiceConfig, JsonRoundTrip) {
  ServiceConfig c;
  c.port = 9001;
  c.corpora["demo"] = "demo/manifest.json";
  c.search.batch_size = 8;
  const ServiceConfig back = Json(c).get<ServiceConfig>();
  EXPECT_EQ(Json(back), Json(c));
  EXPECT_THROW(Json({{"idle_timeout_s", 0}}).get<ServiceConfig>(), Error);
}

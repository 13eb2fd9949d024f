#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "mindpilot/bench.hpp"
#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/evolve.hpp"
#include "mindpilot/io.hpp"
#include "mindpilot/search.hpp"

#include <httplib.h>
// <resolv.h> (pulled in by httplib) defines _res, which breaks Eigen headers
// included afterwards.
#undef _res

namespace mindpilot::service {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

enum class Mode { mental_match, emotion };
enum class EngineKind { search, evolve };

inline std::string to_string(Mode m) { return m == Mode::mental_match ? "mental-match" : "emotion"; }
inline std::string to_string(EngineKind e) { return e == EngineKind::search ? "search" : "evolve"; }

inline Mode mode_from_string(const std::string& s) {
  if (s == "mental-match") return Mode::mental_match;
  if (s == "emotion") return Mode::emotion;
  fail(ErrorCode::invalid_argument, "unknown mode '" + s + "' (expected mental-match or emotion)");
}

inline EngineKind engine_from_string(const std::string& s) {
  if (s == "search") return EngineKind::search;
  if (s == "evolve") return EngineKind::evolve;
  fail(ErrorCode::invalid_argument, "unknown engine '" + s + "' (expected search or evolve)");
}

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Session logs live in <data_dir>/sessions/<id>.jsonl.
  std::string data_dir = "mindpilot-data";
  /// Served under /assets/ when set.
  std::string assets_dir;
  /// Served under / when set (the browser frontend).
  std::string ui_dir;
  /// Base directory for relative manifest paths in create requests.
  std::string corpus_root;
  /// Named corpora: name -> manifest path.
  std::map<std::string, std::string> corpora;
  SearchConfig search;
  EvolveConfig evolve;
  double idle_timeout_s = 24 * 3600.0;
};

inline void to_json(Json& j, const ServiceConfig& c) {
  j = Json{{"host", c.host},         {"port", c.port},       {"data_dir", c.data_dir},
           {"assets_dir", c.assets_dir}, {"ui_dir", c.ui_dir}, {"corpus_root", c.corpus_root},
           {"corpora", c.corpora},   {"search", c.search},   {"evolve", c.evolve},
           {"idle_timeout_s", c.idle_timeout_s}};
}

inline void from_json(const Json& j, ServiceConfig& c) {
  read_optional(j, "host", c.host);
  read_optional(j, "port", c.port);
  read_optional(j, "data_dir", c.data_dir);
  read_optional(j, "assets_dir", c.assets_dir);
  read_optional(j, "ui_dir", c.ui_dir);
  read_optional(j, "corpus_root", c.corpus_root);
  if (j.contains("corpora")) c.corpora = j.at("corpora").get<std::map<std::string, std::string>>();
  if (j.contains("search")) j.at("search").get_to(c.search);
  if (j.contains("evolve")) j.at("evolve").get_to(c.evolve);
  read_optional(j, "idle_timeout_s", c.idle_timeout_s);
  require(c.idle_timeout_s > 0.0, ErrorCode::invalid_argument, "idle_timeout_s must be positive");
}

// ---------------------------------------------------------------------------
// Hashing

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string catalog_digest(const Catalog& c) {
  std::string bytes;
  for (const auto& item : c.items()) {
    bytes += item.id;
    bytes.push_back('\0');
    bytes.append(reinterpret_cast<const char*>(item.embedding.data()),
                 sizeof(double) * static_cast<std::size_t>(item.embedding.size()));
  }
  return hex64(fnv1a(bytes));
}

// ---------------------------------------------------------------------------
// Corpus resolution

/// Corpus references accepted by create requests:
///   "name"                                  named corpus from the service config
///   "path/to/manifest.json"                 relative to corpus_root
///   {"manifest": "path"}                    same as above
///   {"items": [...]}                        inline manifest entries
///   {"synthetic": {catalog config}, "seed": n}  clustered synthetic catalog
inline Catalog resolve_corpus(const Json& ref, const ServiceConfig& cfg) {
  auto from_path = [&](const std::string& p) {
    fs::path path = p;
    if (path.is_relative() && !cfg.corpus_root.empty()) path = fs::path(cfg.corpus_root) / path;
    return io::load_manifest(path);
  };
  if (ref.is_string()) {
    const auto s = ref.get<std::string>();
    if (auto it = cfg.corpora.find(s); it != cfg.corpora.end()) return from_path(it->second);
    return from_path(s);
  }
  require(ref.is_object(), ErrorCode::invalid_argument, "corpus must be a string or an object");
  if (ref.contains("manifest")) return from_path(ref.at("manifest").get<std::string>());
  if (ref.contains("synthetic")) {
    bench::ClusterCatalogConfig cc;
    ref.at("synthetic").get_to(cc);
    Rng rng(ref.value("seed", std::uint64_t{0}), bench::stream::catalog);
    return bench::make_cluster_catalog(cc, rng).catalog;
  }
  if (ref.contains("items")) {
    std::vector<Item> items;
    for (const auto& e : ref.at("items")) {
      Item item;
      item.id = e.at("id").get<std::string>();
      item.embedding = vector_from_json(e.at("embedding"));
      if (auto it = e.find("image"); it != e.end() && it->is_string()) item.payload = it->get<std::string>();
      items.push_back(std::move(item));
    }
    return Catalog(std::move(items));
  }
  fail(ErrorCode::invalid_argument, "corpus object needs 'manifest', 'items' or 'synthetic'");
}

inline Json wrap_errors(const std::function<Json()>& fn, const std::string& context) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    fail(ErrorCode::invalid_argument, context + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Session

struct StepLog {
  std::vector<std::string> ids;
  std::vector<double> ratings;
  double mean = 0.0;
};

/// One rating-driven optimization. Mutations must hold `mutex()`; snapshot()
/// reads the last committed state without locking.
class Session {
  template <class Fn>
  decltype(auto) visit(Fn&& fn) {
    return search_ ? fn(*search_) : fn(*evolve_);
  }
  template <class Fn>
  decltype(auto) visit(Fn&& fn) const {
    return search_ ? fn(*search_) : fn(*evolve_);
  }

 public:
  /// Builds a session from a create request. The request is normalized (engine
  /// config filled from service defaults) so the log alone can rebuild it.
  Session(std::string id, const Json& request, const ServiceConfig& cfg) : id_(std::move(id)) {
    wrap_errors(
        [&] {
          require(request.is_object(), ErrorCode::invalid_argument, "request body must be a JSON object");
          mode_ = mode_from_string(request.value("mode", std::string("mental-match")));
          engine_kind_ = engine_from_string(request.value("engine", std::string("search")));
          seed_ = request.value("seed", std::uint64_t{0});
          require(request.contains("corpus"), ErrorCode::invalid_argument, "request needs a 'corpus' reference");
          const Json overlay = request.value("config", Json::object());
          require(overlay.is_object(), ErrorCode::invalid_argument, "'config' must be an object");
          auto catalog = std::make_shared<const Catalog>(resolve_corpus(request.at("corpus"), cfg));
          Json normalized{{"mode", to_string(mode_)}, {"engine", to_string(engine_kind_)}, {"seed", seed_},
                          {"corpus", request.at("corpus")}};
          if (engine_kind_ == EngineKind::search) {
            Json base = cfg.search;
            base.merge_patch(overlay);
            SearchConfig sc = base.get<SearchConfig>();
            sc.validate(catalog->size());
            normalized["config"] = sc;
            search_.emplace(*catalog, sc, seed_);
          } else {
            Json base = cfg.evolve;
            base.merge_patch(overlay);
            EvolveConfig ec = base.get<EvolveConfig>();
            ec.validate();
            normalized["config"] = ec;
            const std::string gen = request.value("generator", std::string("nearest-neighbor"));
            require(gen == "nearest-neighbor" || gen == "identity", ErrorCode::invalid_argument,
                    "unknown generator '" + gen + "'");
            normalized["generator"] = gen;
            evolve_.emplace(catalog, ec,
                                          gen == "identity" ? Generator::identity() : Generator::nearest_neighbor(catalog),
                                          seed_);
          }
          corpus_digest_ = catalog_digest(*catalog);
          request_ = std::move(normalized);
          return Json();
        },
        "bad create request");
    load_pending();
    publish();
  }

  const std::string& id() const noexcept { return id_; }
  Mode mode() const noexcept { return mode_; }
  EngineKind engine_kind() const noexcept { return engine_kind_; }
  const Json& request() const noexcept { return request_; }
  const std::string& corpus_digest() const noexcept { return corpus_digest_; }
  std::mutex& mutex() noexcept { return mu_; }
  std::size_t completed() const noexcept { return steps_.size(); }
  const std::vector<StepLog>& steps() const noexcept { return steps_; }
  bool done() const {
    return visit([](const auto& e) { return e.done(); });
  }
  const std::vector<Item>& pending() const noexcept { return pending_; }

  std::size_t total_steps() const {
    return search_ ? search_->config().max_iterations : evolve_->planned_iterations() + 1;
  }

  /// Applies ratings keyed by item id. Requires exact coverage of the pending
  /// batch and values in [0, 1]; on any violation the session is unchanged.
  StepLog submit(const Json& ratings, std::optional<std::size_t> iteration) {
    require(!done(), ErrorCode::conflict, "session is finished");
    if (iteration && *iteration != completed())
      fail(ErrorCode::conflict, "stale batch: ratings are for iteration " + std::to_string(*iteration) +
                                    ", session is at " + std::to_string(completed()));
    require(ratings.is_object(), ErrorCode::invalid_argument, "'ratings' must be an object mapping item id to value");
    require(ratings.size() == pending_.size(), ErrorCode::invalid_argument,
            "ratings must cover the pending batch exactly: expected " + std::to_string(pending_.size()) + ", got " +
                std::to_string(ratings.size()));
    StepLog step;
    for (const auto& item : pending_) {
      auto it = ratings.find(item.id);
      require(it != ratings.end(), ErrorCode::invalid_argument, "missing rating for pending item '" + item.id + "'");
      require(it->is_number(), ErrorCode::invalid_argument, "rating for '" + item.id + "' is not a number");
      const double v = it->get<double>();
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::invalid_argument,
              "rating for '" + item.id + "' must lie in [0, 1]");
      step.ids.push_back(item.id);
      step.ratings.push_back(v);
    }
    return apply(std::move(step));
  }

  /// Commits ratings given in pending-batch order.
  StepLog apply(StepLog step) {
    require(step.ids.size() == pending_.size() && step.ratings.size() == pending_.size(), ErrorCode::invalid_argument,
            "step does not match the pending batch");
    for (std::size_t i = 0; i < pending_.size(); ++i)
      require(step.ids[i] == pending_[i].id, ErrorCode::conflict,
              "step item '" + step.ids[i] + "' does not match pending item '" + pending_[i].id + "'");
    visit([&](auto& e) { e.commit(step.ratings); });
    step.mean = stats::mean(step.ratings);
    steps_.push_back(step);
    load_pending();
    publish();
    return step;
  }

  /// Canonical serialization of the engine state plus the rating history.
  Json canonical_state() const {
    Json j = visit([](const auto& e) { return state_to_json(e.state()); });
    Json hist = Json::array();
    for (const auto& s : steps_) hist.push_back({{"ids", s.ids}, {"ratings", s.ratings}});
    return Json{{"engine", std::move(j)}, {"steps", std::move(hist)}};
  }

  std::string digest() const { return hex64(fnv1a(canonical_state().dump())); }

  std::shared_ptr<const Json> snapshot() const { return std::atomic_load(&snapshot_); }

  void touch() { last_used_.store(std::chrono::steady_clock::now().time_since_epoch().count()); }
  std::chrono::steady_clock::time_point last_used() const {
    return std::chrono::steady_clock::time_point(std::chrono::steady_clock::duration(last_used_.load()));
  }

 private:
  void load_pending() {
    pending_.clear();
    if (done()) return;
    if (search_) {
      for (std::size_t i : search_->propose()) pending_.push_back(search_->catalog()[i]);
    } else {
      pending_ = evolve_->propose();
    }
  }

  static Json item_json(const Item& item) {
    Json j{{"id", item.id}};
    if (item.payload) {
      const std::string& p = *item.payload;
      const bool absolute = p.rfind("http://", 0) == 0 || p.rfind("https://", 0) == 0 || p.rfind('/', 0) == 0;
      j["uri"] = absolute ? p : "/assets/" + p;
    } else {
      j["uri"] = nullptr;
    }
    return j;
  }

  void publish() {
    Json items = Json::array();
    for (const auto& item : pending_) items.push_back(item_json(item));
    Json means = Json::array();
    for (const auto& s : steps_) means.push_back(s.mean);
    Json best = nullptr;
    double ent = 0.0;
    visit([&](const auto& e) {
          const auto& st = e.state();
          ent = entropy(st.probs);
          if (st.best) {
            const Item* item = nullptr;
            if constexpr (std::is_same_v<std::decay_t<decltype(e)>, SearchEngine>) item = &e.catalog()[st.best->index];
            else item = &st.catalog[st.best->index];
            best = item_json(*item);
            best["reward"] = st.best->reward;
          }
        });
    auto snap = std::make_shared<const Json>(Json{{"session_id", id_},
                                                  {"mode", to_string(mode_)},
                                                  {"engine", to_string(engine_kind_)},
                                                  {"iteration", steps_.size()},
                                                  {"total_steps", total_steps()},
                                                  {"done", done()},
                                                  {"state", done() ? "done" : "pending"},
                                                  {"mean_ratings", std::move(means)},
                                                  {"best", std::move(best)},
                                                  {"entropy", ent},
                                                  {"batch", {{"iteration", steps_.size()}, {"items", std::move(items)}}}});
    std::atomic_store(&snapshot_, std::shared_ptr<const Json>(std::move(snap)));
    touch();
  }

  std::string id_;
  Mode mode_ = Mode::mental_match;
  EngineKind engine_kind_ = EngineKind::search;
  std::uint64_t seed_ = 0;
  Json request_;
  std::string corpus_digest_;
  std::optional<SearchEngine> search_;
  std::optional<EvolveEngine> evolve_;
  std::vector<Item> pending_;
  std::vector<StepLog> steps_;
  std::mutex mu_;
  std::shared_ptr<const Json> snapshot_;
  std::atomic<std::chrono::steady_clock::rep> last_used_{0};
};

// ---------------------------------------------------------------------------
// Event log and replay

inline Json create_record(const Session& s) {
  return Json{{"type", "create"}, {"session_id", s.id()}, {"request", s.request()}, {"corpus_digest", s.corpus_digest()},
              {"digest", s.digest()}};
}

inline Json step_record(const Session& s, const StepLog& step) {
  return Json{{"type", "step"},    {"iteration", s.completed()}, {"ids", step.ids},
              {"ratings", step.ratings}, {"digest", s.digest()}};
}

struct ReplayResult {
  std::unique_ptr<Session> session;
  std::size_t steps = 0;
  /// Digest recorded with the last log entry.
  std::string logged_digest;
};

/// Rebuilds a session by re-running its log. Every step's recorded digest is
/// checked; a mismatch raises `conflict`.
inline ReplayResult replay_log(const fs::path& path, const ServiceConfig& cfg) {
  require(fs::exists(path), ErrorCode::not_found, "session log '" + path.string() + "' not found");
  const auto records = io::read_jsonl(path);
  require(!records.empty() && records.front().value("type", "") == "create", ErrorCode::invalid_argument,
          "session log '" + path.string() + "' does not start with a create record");
  ReplayResult r;
  const Json& head = records.front();
  r.session = std::make_unique<Session>(head.at("session_id").get<std::string>(), head.at("request"), cfg);
  require(r.session->corpus_digest() == head.at("corpus_digest").get<std::string>(), ErrorCode::conflict,
          "corpus changed since session '" + r.session->id() + "' was created");
  r.logged_digest = head.at("digest").get<std::string>();
  require(r.session->digest() == r.logged_digest, ErrorCode::conflict, "replay diverged at create");
  for (std::size_t k = 1; k < records.size(); ++k) {
    const Json& rec = records[k];
    require(rec.value("type", "") == "step", ErrorCode::invalid_argument,
            path.string() + ":" + std::to_string(k + 1) + ": unknown record type");
    StepLog step;
    step.ids = rec.at("ids").get<std::vector<std::string>>();
    step.ratings = rec.at("ratings").get<std::vector<double>>();
    r.session->apply(std::move(step));
    r.logged_digest = rec.at("digest").get<std::string>();
    require(r.session->digest() == r.logged_digest, ErrorCode::conflict,
            "replay diverged at step " + std::to_string(r.session->completed()));
    ++r.steps;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Session store and HTTP front end

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::shape_mismatch:
    case ErrorCode::degenerate_vector:
    case ErrorCode::non_finite:
    case ErrorCode::ill_conditioned: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::io:
    case ErrorCode::evaluation_failed: return 500;
  }
  return 500;
}

inline Json error_json(ErrorCode code, const std::string& message) {
  return Json{{"code", std::string(to_string(code))}, {"message", message}};
}

inline bool valid_session_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

class Service {
 public:
  explicit Service(ServiceConfig cfg) : cfg_(std::move(cfg)) { fs::create_directories(sessions_dir()); }

  const ServiceConfig& config() const noexcept { return cfg_; }
  fs::path sessions_dir() const { return fs::path(cfg_.data_dir) / "sessions"; }
  fs::path log_path(const std::string& id) const { return sessions_dir() / (id + ".jsonl"); }

  Json create_session(const Json& body) {
    evict_idle();
    auto session = std::make_shared<Session>(new_id(), body, cfg_);
    io::JsonlWriter(log_path(session->id()), true).write(create_record(*session));
    {
      std::unique_lock lock(mu_);
      sessions_[session->id()] = session;
    }
    Json out = *session->snapshot();
    return out;
  }

  Json get_batch(const std::string& id) {
    const auto snap = find(id)->snapshot();
    Json out = (*snap)["batch"];
    out["session_id"] = id;
    out["done"] = (*snap)["done"];
    return out;
  }

  Json get_state(const std::string& id) {
    Json out = *find(id)->snapshot();
    out.erase("batch");
    return out;
  }

  /// Body: {"ratings": {id: value}, "iteration": k (optional)}.
  Json submit_ratings(const std::string& id, const Json& body) {
    auto session = find(id);
    std::unique_lock lock(session->mutex(), std::try_to_lock);
    require(lock.owns_lock(), ErrorCode::conflict, "another submission for session '" + id + "' is in progress");
    require(body.is_object() && body.contains("ratings"), ErrorCode::invalid_argument, "body needs a 'ratings' object");
    std::optional<std::size_t> iteration;
    if (auto it = body.find("iteration"); it != body.end() && !it->is_null()) {
      require(it->is_number_integer() && it->get<std::int64_t>() >= 0, ErrorCode::invalid_argument,
              "'iteration' must be a non-negative integer");
      iteration = it->get<std::size_t>();
    }
    const StepLog step = session->submit(body.at("ratings"), iteration);
    io::JsonlWriter(log_path(id)).write(step_record(*session, step));
    return *session->snapshot();
  }

  /// Drops sessions idle longer than the timeout from memory; logs stay on disk.
  std::size_t evict_idle(std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now()) {
    const auto limit = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(cfg_.idle_timeout_s));
    std::unique_lock lock(mu_);
    std::size_t n = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      std::unique_lock busy(it->second->mutex(), std::try_to_lock);
      if (busy.owns_lock() && now - it->second->last_used() > limit) {
        busy.unlock();
        it = sessions_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

  bool loaded(const std::string& id) const {
    std::shared_lock lock(mu_);
    return sessions_.count(id) != 0;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return sessions_.size();
  }

  /// Session by id, restoring it from its log when it is not in memory.
  std::shared_ptr<Session> find(const std::string& id) {
    require(valid_session_id(id), ErrorCode::not_found, "unknown session '" + id + "'");
    {
      std::shared_lock lock(mu_);
      if (auto it = sessions_.find(id); it != sessions_.end()) {
        it->second->touch();
        return it->second;
      }
    }
    require(fs::exists(log_path(id)), ErrorCode::not_found, "unknown session '" + id + "'");
    std::unique_lock lock(restore_mu_);
    {
      std::shared_lock read(mu_);
      if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
    }
    std::shared_ptr<Session> restored = replay_log(log_path(id), cfg_).session;
    std::unique_lock write(mu_);
    return sessions_.emplace(id, std::move(restored)).first->second;
  }

  /// Registers the JSON API (and static mounts) on `server`.
  void mount(httplib::Server& server) {
    auto handle = [](httplib::Response& res, int ok_status, const std::function<Json()>& fn) {
      try {
        const Json body = fn();
        res.status = ok_status;
        res.set_content(body.dump(), "application/json");
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(error_json(e.code(), e.what()).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(Json{{"code", "internal"}, {"message", e.what()}}.dump(), "application/json");
      }
    };
    auto parse = [](const httplib::Request& req) {
      try {
        return req.body.empty() ? Json::object() : Json::parse(req.body);
      } catch (const Json::parse_error& e) {
        fail(ErrorCode::invalid_argument, std::string("malformed JSON body: ") + e.what());
      }
    };
    server.Post("/sessions", [this, handle, parse](const httplib::Request& req, httplib::Response& res) {
      handle(res, 201, [&] { return create_session(parse(req)); });
    });
    server.Get("/sessions/:id/batch", [this, handle](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] { return get_batch(req.path_params.at("id")); });
    });
    server.Get("/sessions/:id/state", [this, handle](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] { return get_state(req.path_params.at("id")); });
    });
    server.Post("/sessions/:id/ratings", [this, handle, parse](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] { return submit_ratings(req.path_params.at("id"), parse(req)); });
    });
    if (!cfg_.assets_dir.empty()) {
      require(server.set_mount_point("/assets", cfg_.assets_dir), ErrorCode::not_found,
              "assets_dir '" + cfg_.assets_dir + "' is not a directory");
    }
    if (!cfg_.ui_dir.empty()) {
      require(server.set_mount_point("/", cfg_.ui_dir), ErrorCode::not_found,
              "ui_dir '" + cfg_.ui_dir + "' is not a directory");
    }
  }

 private:
  std::string new_id() {
    std::lock_guard lock(id_mu_);
    if (!id_rng_) {
      std::random_device rd;
      id_rng_.emplace((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    }
    for (;;) {
      const std::string id = hex64((*id_rng_)()) + hex64((*id_rng_)());
      if (!fs::exists(log_path(id))) return id;
    }
  }

  ServiceConfig cfg_;
  mutable std::shared_mutex mu_;
  std::mutex restore_mu_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex id_mu_;
  std::optional<std::mt19937_64> id_rng_;
};

/// Blocking HTTP server around a Service.
class Server {
 public:
  explicit Server(ServiceConfig cfg) : service_(std::move(cfg)) { service_.mount(http_); }

  Service& service() noexcept { return service_; }
  httplib::Server& http() noexcept { return http_; }

  /// Binds host:port (port 0 picks a free port) and returns the bound port.
  int bind() {
    const auto& c = service_.config();
    port_ = c.port == 0 ? http_.bind_to_any_port(c.host) : (http_.bind_to_port(c.host, c.port) ? c.port : -1);
    require(port_ > 0, ErrorCode::io, "cannot bind " + c.host + ":" + std::to_string(c.port));
    return port_;
  }

  /// Serves until stop(); bind() must have succeeded.
  bool serve() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }
  int port() const noexcept { return port_; }

 private:
  Service service_;
  httplib::Server http_;
  int port_ = -1;
};

}  // namespace mindpilot::service

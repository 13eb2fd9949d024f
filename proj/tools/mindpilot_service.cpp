// HTTP session service for rating-driven optimization.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>

#include "mindpilot/service.hpp"

namespace mp = mindpilot;

namespace {
mp::service::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MindPilot session service"};
  std::string config_path;
  int port = -1;
  std::string data_dir;
  app.add_option("--config", config_path, "service config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--port", port, "listen port (0 = any free port)");
  app.add_option("--data-dir", data_dir, "session log directory");
  CLI11_PARSE(app, argc, argv);

  try {
    mp::service::ServiceConfig cfg;
    if (!config_path.empty()) cfg = mp::io::read_json(config_path).get<mp::service::ServiceConfig>();
    if (port >= 0) cfg.port = port;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    mp::service::Server server(cfg);
    const int bound = server.bind();
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::printf("listening on http://%s:%d (data: %s)\n", cfg.host.c_str(), bound, cfg.data_dir.c_str());
    std::fflush(stdout);
    return server.serve() ? 0 : 1;
  } catch (const mp::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(mp::to_string(e.code())).c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 1;
}

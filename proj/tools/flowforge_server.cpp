#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "flowforge/gateway/platform.hpp"
#include "flowforge/gateway/server.hpp"

namespace {

flowforge::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowforge gateway server", "flowforge-server"};
  std::string host = "127.0.0.1";
  int port = std::stoi(env_or("FLOWFORGE_PORT", "8080"));
  std::string data_dir = env_or("FLOWFORGE_DATA_DIR", "./flowforge-data");
  std::string token = env_or("FLOWFORGE_AUTH_TOKEN", "");
  std::string ui_dir = env_or("FLOWFORGE_UI_DIR", "");
  app.add_option("--host", host, "Listen address")->capture_default_str();
  app.add_option("--port", port, "Listen port, 0 for any")->capture_default_str();
  app.add_option("--data-dir", data_dir, "State directory")->capture_default_str();
  app.add_option("--token", token, "Bearer token required on /api");
  app.add_option("--ui-dir", ui_dir, "Static dashboard assets");
  CLI11_PARSE(app, argc, argv);

  try {
    flowforge::Platform platform(data_dir);
    flowforge::ServerConfig config;
    config.host = host;
    config.port = port;
    if (!token.empty()) config.auth_token = token;
    config.ui_dir = ui_dir;
    flowforge::Server server(platform, config);
    int bound = server.bind();
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "flowforge gateway listening on http://" << host << ":" << bound << std::endl;
    server.serve();
    g_server = nullptr;
  } catch (const flowforge::Error& e) {
    std::cerr << "flowforge-server: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

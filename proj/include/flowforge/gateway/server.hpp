#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "flowforge/error.hpp"
#include "flowforge/gateway/platform.hpp"

namespace flowforge {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::string> auth_token;
  /// Static dashboard assets served under /ui when the directory exists.
  std::filesystem::path ui_dir;
};

/// {"status","code","message","details"} for an error.
nlohmann::json api_error_body(const Error& error);

/// HTTP gateway over a Platform. Every /api route except /api/health sits
/// behind the optional bearer token.
class Server {
 public:
  Server(Platform& platform, ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Returns the bound port; throws kBindError.
  int bind();
  /// Blocks serving requests until stop().
  void serve();
  /// bind() plus serve() on a background thread.
  int start();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace flowforge

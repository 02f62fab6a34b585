#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowforge::cli {

enum ExitCode { kOk = 0, kApiFailure = 1, kUsage = 2 };

struct CliConfig {
  std::string endpoint = "http://127.0.0.1:8080";
  std::optional<std::string> token;
  std::string output = "table";
};

/// Reads `key = "value"` lines from a flat TOML file (endpoint, token,
/// output). Comments and blank lines are skipped; anything else is ignored.
std::map<std::string, std::string> read_config_file(const std::string& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment plus $HOME/.flowforge.toml.
EnvLookup process_env();

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env());

}  // namespace flowforge::cli

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowforge {

/// MAJOR.MINOR.PATCH[-prerelease][+build], compared by semantic-version
/// precedence (build metadata ignored).
struct SemVer {
  unsigned long long major = 0;
  unsigned long long minor = 0;
  unsigned long long patch = 0;
  std::vector<std::string> prerelease;
  std::string build;

  static std::optional<SemVer> parse(std::string_view text);
};

/// -1, 0 or 1.
int compare(const SemVer& lhs, const SemVer& rhs);

/// Precedence comparison of two version strings; both must parse.
int compare_versions(std::string_view lhs, std::string_view rhs);

}  // namespace flowforge

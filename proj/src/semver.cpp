#include "flowforge/semver.hpp"

#include <charconv>

#include "flowforge/error.hpp"

namespace flowforge {
namespace {

bool is_numeric_id(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

bool is_ident_char(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '-';
}

std::optional<unsigned long long> parse_core_number(std::string_view s) {
  if (!is_numeric_id(s)) return std::nullopt;
  if (s.size() > 1 && s.front() == '0') return std::nullopt;
  unsigned long long out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return out;
}

std::optional<std::vector<std::string>> split_ids(std::string_view s, bool numeric_rules) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto dot = s.find('.', start);
    auto part = s.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (part.empty()) return std::nullopt;
    for (char c : part) {
      if (!is_ident_char(c)) return std::nullopt;
    }
    if (numeric_rules && is_numeric_id(part) && part.size() > 1 && part.front() == '0') {
      return std::nullopt;
    }
    out.emplace_back(part);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

}  // namespace

std::optional<SemVer> SemVer::parse(std::string_view text) {
  SemVer v;
  auto plus = text.find('+');
  if (plus != std::string_view::npos) {
    auto build = text.substr(plus + 1);
    if (!split_ids(build, false)) return std::nullopt;
    v.build = std::string(build);
    text = text.substr(0, plus);
  }
  auto dash = text.find('-');
  if (dash != std::string_view::npos) {
    auto pre = split_ids(text.substr(dash + 1), true);
    if (!pre) return std::nullopt;
    v.prerelease = std::move(*pre);
    text = text.substr(0, dash);
  }
  auto d1 = text.find('.');
  if (d1 == std::string_view::npos) return std::nullopt;
  auto d2 = text.find('.', d1 + 1);
  if (d2 == std::string_view::npos) return std::nullopt;
  auto major = parse_core_number(text.substr(0, d1));
  auto minor = parse_core_number(text.substr(d1 + 1, d2 - d1 - 1));
  auto patch = parse_core_number(text.substr(d2 + 1));
  if (!major || !minor || !patch) return std::nullopt;
  v.major = *major;
  v.minor = *minor;
  v.patch = *patch;
  return v;
}

int compare(const SemVer& lhs, const SemVer& rhs) {
  auto cmp3 = [](unsigned long long a, unsigned long long b) { return a < b ? -1 : (a > b ? 1 : 0); };
  if (int c = cmp3(lhs.major, rhs.major)) return c;
  if (int c = cmp3(lhs.minor, rhs.minor)) return c;
  if (int c = cmp3(lhs.patch, rhs.patch)) return c;
  // A release outranks any of its prereleases.
  if (lhs.prerelease.empty() || rhs.prerelease.empty()) {
    if (lhs.prerelease.empty() && rhs.prerelease.empty()) return 0;
    return lhs.prerelease.empty() ? 1 : -1;
  }
  std::size_t n = std::min(lhs.prerelease.size(), rhs.prerelease.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = lhs.prerelease[i];
    const auto& b = rhs.prerelease[i];
    bool an = is_numeric_id(a);
    bool bn = is_numeric_id(b);
    if (an && bn) {
      if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
      if (int c = a.compare(b)) return c < 0 ? -1 : 1;
    } else if (an != bn) {
      return an ? -1 : 1;
    } else if (int c = a.compare(b)) {
      return c < 0 ? -1 : 1;
    }
  }
  return cmp3(lhs.prerelease.size(), rhs.prerelease.size());
}

int compare_versions(std::string_view lhs, std::string_view rhs) {
  auto a = SemVer::parse(lhs);
  auto b = SemVer::parse(rhs);
  if (!a || !b) throw Error(Errc::kInvalidArgument, "not a semantic version");
  return compare(*a, *b);
}

}  // namespace flowforge

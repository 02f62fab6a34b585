#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowforge/frame.hpp"

namespace flowforge {

enum class ServiceKind { kSource, kProcessor, kSink, kTask };

std::string_view kind_name(ServiceKind kind);
std::optional<ServiceKind> parse_kind(std::string_view name);

enum class ParamType { kString, kInt, kFloat, kBool, kEnum };

std::string_view param_type_name(ParamType type);
std::optional<ParamType> parse_param_type(std::string_view name);

struct ParamSpec {
  std::string name;
  ParamType dtype = ParamType::kString;
  std::vector<std::string> allowed_values;  // enum only
  std::optional<Value> default_value;       // enum defaults are strings
  bool required = false;
  std::string doc;

  bool operator==(const ParamSpec&) const = default;
};

struct ServiceDescriptor {
  std::string name;
  std::string version;
  ServiceKind kind = ServiceKind::kProcessor;
  std::string description;
  std::string framework = "builtin";
  std::vector<ParamSpec> params;
  std::string artifact_ref;
  std::set<std::string> tags;

  const ParamSpec* find_param(std::string_view param) const;
  bool operator==(const ServiceDescriptor&) const = default;
};

/// Coerces a literal binding to a parameter's type: int is a decimal integer,
/// float a decimal with optional exponent, bool true/false in any case, enum an
/// exact allowed value. Returns nullopt if the literal does not conform.
std::optional<Value> coerce_param(const ParamSpec& spec, std::string_view literal);

/// Field-level reasons a descriptor is invalid; empty when valid.
std::vector<std::pair<std::string, std::string>> check_descriptor(const ServiceDescriptor& d);

nlohmann::json descriptor_to_json(const ServiceDescriptor& d);
/// Throws kInvalidDescriptor with field-level details on malformed input.
ServiceDescriptor descriptor_from_json(const nlohmann::json& j);
/// Canonical single-line serialization (sorted keys).
std::string canonical_json(const ServiceDescriptor& d);

struct CatalogueEntryId {
  std::string name;
  std::string version;

  std::string str() const { return name + "@" + version; }
  bool operator==(const CatalogueEntryId&) const = default;
};

struct ServiceFilter {
  std::optional<ServiceKind> kind;
  std::optional<std::string> tag;
  std::optional<std::string> text;
};

/// Registry of service descriptors, backed by an append-only journal of
/// register/unregister events that is replayed on construction.
///
/// Reads take a shared lock; writes are serialized. Every failing call leaves
/// the catalogue unchanged.
class Catalogue {
 public:
  /// Predicate deciding whether (name, version) is referenced by a workflow.
  using InUsePredicate = std::function<bool(const std::string&, const std::string&)>;

  explicit Catalogue(std::optional<std::filesystem::path> journal = std::nullopt);

  Catalogue(const Catalogue&) = delete;
  Catalogue& operator=(const Catalogue&) = delete;

  CatalogueEntryId register_service(const ServiceDescriptor& descriptor);

  /// Without a version, resolves to the highest semantic version.
  ServiceDescriptor get_service(std::string_view name,
                                std::optional<std::string_view> version = std::nullopt) const;

  /// Matches ordered by (name, semantic version).
  std::vector<ServiceDescriptor> list_services(const ServiceFilter& filter = {}) const;

  void unregister_service(std::string_view name, std::string_view version,
                          const InUsePredicate& in_use = nullptr);

  std::size_t size() const;

  /// Journal lines skipped during replay because they failed to parse.
  std::size_t skipped_journal_lines() const { return skipped_lines_; }

 private:
  struct VersionLess {
    bool operator()(const std::string& a, const std::string& b) const;
  };
  using Versions = std::map<std::string, ServiceDescriptor, VersionLess>;

  void replay();
  void append_journal(std::string_view op, const ServiceDescriptor& d);

  mutable std::shared_mutex mutex_;
  std::map<std::string, Versions, std::less<>> services_;
  std::optional<std::filesystem::path> journal_;
  std::size_t skipped_lines_ = 0;
};

}  // namespace flowforge

#include "flowforge/catalogue.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <regex>

#include "flowforge/error.hpp"
#include "flowforge/semver.hpp"

namespace flowforge {

using nlohmann::json;

namespace {

const std::regex& service_name_re() {
  static const std::regex re("[a-z][a-z0-9-]*");
  return re;
}

const std::regex& param_name_re() {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_.-]*");
  return re;
}

const std::regex& int_literal_re() {
  static const std::regex re("[+-]?[0-9]+");
  return re;
}

const std::regex& float_literal_re() {
  static const std::regex re("[+-]?([0-9]+\\.?[0-9]*|\\.[0-9]+)([eE][+-]?[0-9]+)?");
  return re;
}

bool default_conforms(const ParamSpec& p, const Value& v) {
  switch (p.dtype) {
    case ParamType::kString: return std::holds_alternative<std::string>(v);
    case ParamType::kInt: return std::holds_alternative<std::int64_t>(v);
    case ParamType::kFloat: return std::holds_alternative<double>(v);
    case ParamType::kBool: return std::holds_alternative<bool>(v);
    case ParamType::kEnum: {
      const auto* s = std::get_if<std::string>(&v);
      return s && std::find(p.allowed_values.begin(), p.allowed_values.end(), *s) !=
                      p.allowed_values.end();
    }
  }
  return false;
}

json param_value_to_json(const Value& v) { return value_to_json(v); }

std::optional<Value> param_value_from_json(const ParamSpec& p, const json& j) {
  switch (p.dtype) {
    case ParamType::kString:
    case ParamType::kEnum:
      if (j.is_string()) return Value(j.get<std::string>());
      break;
    case ParamType::kInt:
      if (j.is_number_integer()) return Value(j.get<std::int64_t>());
      break;
    case ParamType::kFloat:
      if (j.is_number()) return Value(j.get<double>());
      break;
    case ParamType::kBool:
      if (j.is_boolean()) return Value(j.get<bool>());
      break;
  }
  return std::nullopt;
}

}  // namespace

std::string_view kind_name(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::kSource: return "source";
    case ServiceKind::kProcessor: return "processor";
    case ServiceKind::kSink: return "sink";
    case ServiceKind::kTask: return "task";
  }
  return "processor";
}

std::optional<ServiceKind> parse_kind(std::string_view name) {
  if (name == "source") return ServiceKind::kSource;
  if (name == "processor") return ServiceKind::kProcessor;
  if (name == "sink") return ServiceKind::kSink;
  if (name == "task") return ServiceKind::kTask;
  return std::nullopt;
}

std::string_view param_type_name(ParamType type) {
  switch (type) {
    case ParamType::kString: return "string";
    case ParamType::kInt: return "int";
    case ParamType::kFloat: return "float";
    case ParamType::kBool: return "bool";
    case ParamType::kEnum: return "enum";
  }
  return "string";
}

std::optional<ParamType> parse_param_type(std::string_view name) {
  if (name == "string") return ParamType::kString;
  if (name == "int") return ParamType::kInt;
  if (name == "float") return ParamType::kFloat;
  if (name == "bool") return ParamType::kBool;
  if (name == "enum") return ParamType::kEnum;
  return std::nullopt;
}

const ParamSpec* ServiceDescriptor::find_param(std::string_view param) const {
  for (const auto& p : params) {
    if (p.name == param) return &p;
  }
  return nullptr;
}

std::optional<Value> coerce_param(const ParamSpec& spec, std::string_view literal) {
  std::string s(literal);
  switch (spec.dtype) {
    case ParamType::kString:
      return Value(std::move(s));
    case ParamType::kInt: {
      if (!std::regex_match(s, int_literal_re())) return std::nullopt;
      std::int64_t out = 0;
      const char* begin = s.data() + (s.front() == '+' ? 1 : 0);
      auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
      return Value(out);
    }
    case ParamType::kFloat: {
      if (!std::regex_match(s, float_literal_re())) return std::nullopt;
      double out = 0;
      const char* begin = s.data() + (s.front() == '+' ? 1 : 0);
      auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
      return Value(out);
    }
    case ParamType::kBool: {
      std::transform(s.begin(), s.end(), s.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (s == "true") return Value(true);
      if (s == "false") return Value(false);
      return std::nullopt;
    }
    case ParamType::kEnum:
      if (std::find(spec.allowed_values.begin(), spec.allowed_values.end(), s) !=
          spec.allowed_values.end()) {
        return Value(std::move(s));
      }
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> check_descriptor(const ServiceDescriptor& d) {
  std::vector<std::pair<std::string, std::string>> reasons;
  if (d.name.empty() || d.name.size() > 64 || !std::regex_match(d.name, service_name_re())) {
    reasons.emplace_back("name", "must match [a-z][a-z0-9-]* with length 1..64");
  }
  if (!SemVer::parse(d.version)) {
    reasons.emplace_back("version", "must be a semantic version MAJOR.MINOR.PATCH");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < d.params.size(); ++i) {
    const auto& p = d.params[i];
    std::string field = "params[" + std::to_string(i) + "]";
    if (!std::regex_match(p.name, param_name_re())) {
      reasons.emplace_back(field + ".name", "invalid parameter name");
    }
    if (!seen.insert(p.name).second) {
      reasons.emplace_back(field + ".name", "duplicate parameter name '" + p.name + "'");
    }
    if (p.dtype == ParamType::kEnum && p.allowed_values.empty()) {
      reasons.emplace_back(field + ".allowed_values", "enum parameter needs allowed values");
    }
    if (p.dtype != ParamType::kEnum && !p.allowed_values.empty()) {
      reasons.emplace_back(field + ".allowed_values", "only enum parameters take allowed values");
    }
    if (p.required && p.default_value) {
      reasons.emplace_back(field + ".default", "required parameter must not have a default");
    }
    if (!p.required && !p.default_value) {
      reasons.emplace_back(field + ".default", "optional parameter needs a default");
    }
    if (p.default_value && !default_conforms(p, *p.default_value)) {
      reasons.emplace_back(field + ".default", "default does not conform to dtype");
    }
  }
  return reasons;
}

json descriptor_to_json(const ServiceDescriptor& d) {
  json params = json::array();
  for (const auto& p : d.params) {
    json jp = {{"name", p.name},
               {"dtype", param_type_name(p.dtype)},
               {"required", p.required},
               {"doc", p.doc}};
    if (p.dtype == ParamType::kEnum) jp["allowed_values"] = p.allowed_values;
    if (p.default_value) jp["default"] = param_value_to_json(*p.default_value);
    params.push_back(std::move(jp));
  }
  return {{"name", d.name},
          {"version", d.version},
          {"kind", kind_name(d.kind)},
          {"description", d.description},
          {"framework", d.framework},
          {"params", std::move(params)},
          {"artifact_ref", d.artifact_ref},
          {"tags", d.tags}};
}

ServiceDescriptor descriptor_from_json(const json& j) {
  json reasons = json::array();
  auto fail = [&](const std::string& field, const std::string& reason) {
    reasons.push_back({{"field", field}, {"reason", reason}});
  };
  ServiceDescriptor d;
  if (!j.is_object()) {
    throw Error(Errc::kInvalidDescriptor, "descriptor must be a JSON object",
                {{"reasons", json::array({{{"field", ""}, {"reason", "not an object"}}})}});
  }
  auto get_string = [&](const char* key, std::string& out, bool required) {
    if (!j.contains(key)) {
      if (required) fail(key, "missing");
      return;
    }
    if (!j[key].is_string()) {
      fail(key, "must be a string");
      return;
    }
    out = j[key].get<std::string>();
  };
  get_string("name", d.name, true);
  get_string("version", d.version, true);
  get_string("description", d.description, false);
  get_string("framework", d.framework, false);
  get_string("artifact_ref", d.artifact_ref, false);
  if (!j.contains("kind")) {
    fail("kind", "missing");
  } else if (!j["kind"].is_string() || !parse_kind(j["kind"].get<std::string>())) {
    fail("kind", "must be one of source, processor, sink, task");
  } else {
    d.kind = *parse_kind(j["kind"].get<std::string>());
  }
  if (j.contains("tags")) {
    if (!j["tags"].is_array()) {
      fail("tags", "must be an array of strings");
    } else {
      for (const auto& t : j["tags"]) {
        if (!t.is_string()) {
          fail("tags", "must be an array of strings");
          break;
        }
        d.tags.insert(t.get<std::string>());
      }
    }
  }
  if (j.contains("params")) {
    if (!j["params"].is_array()) {
      fail("params", "must be an array");
    } else {
      for (std::size_t i = 0; i < j["params"].size(); ++i) {
        const auto& jp = j["params"][i];
        std::string field = "params[" + std::to_string(i) + "]";
        if (!jp.is_object() || !jp.contains("name") || !jp["name"].is_string()) {
          fail(field, "needs a string name");
          continue;
        }
        ParamSpec p;
        p.name = jp["name"].get<std::string>();
        auto dtype = jp.contains("dtype") && jp["dtype"].is_string()
                         ? parse_param_type(jp["dtype"].get<std::string>())
                         : std::nullopt;
        if (!dtype) {
          fail(field + ".dtype", "must be one of string, int, float, bool, enum");
          continue;
        }
        p.dtype = *dtype;
        if (jp.contains("required")) {
          if (!jp["required"].is_boolean()) {
            fail(field + ".required", "must be a boolean");
          } else {
            p.required = jp["required"].get<bool>();
          }
        }
        if (jp.contains("doc") && jp["doc"].is_string()) p.doc = jp["doc"].get<std::string>();
        if (jp.contains("allowed_values")) {
          if (!jp["allowed_values"].is_array()) {
            fail(field + ".allowed_values", "must be an array of strings");
          } else {
            for (const auto& v : jp["allowed_values"]) {
              if (v.is_string()) {
                p.allowed_values.push_back(v.get<std::string>());
              } else {
                fail(field + ".allowed_values", "must be an array of strings");
                break;
              }
            }
          }
        }
        if (jp.contains("default") && !jp["default"].is_null()) {
          auto v = param_value_from_json(p, jp["default"]);
          if (!v) {
            fail(field + ".default", "default does not conform to dtype");
          } else {
            p.default_value = std::move(v);
          }
        }
        d.params.push_back(std::move(p));
      }
    }
  }
  if (!reasons.empty()) {
    throw Error(Errc::kInvalidDescriptor, "invalid service descriptor", {{"reasons", reasons}});
  }
  return d;
}

std::string canonical_json(const ServiceDescriptor& d) { return descriptor_to_json(d).dump(); }

bool Catalogue::VersionLess::operator()(const std::string& a, const std::string& b) const {
  auto va = SemVer::parse(a);
  auto vb = SemVer::parse(b);
  if (va && vb) {
    if (int c = compare(*va, *vb)) return c < 0;
  }
  return a < b;
}

Catalogue::Catalogue(std::optional<std::filesystem::path> journal) : journal_(std::move(journal)) {
  if (journal_) replay();
}

void Catalogue::replay() {
  std::ifstream in(*journal_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json event = json::parse(line, nullptr, false);
    if (event.is_discarded() || !event.is_object() || !event.contains("op") ||
        !event.contains("descriptor")) {
      ++skipped_lines_;
      continue;
    }
    try {
      auto d = descriptor_from_json(event["descriptor"]);
      const auto op = event["op"].get<std::string>();
      if (op == "register") {
        services_[d.name][d.version] = d;
      } else if (op == "unregister") {
        auto it = services_.find(d.name);
        if (it != services_.end()) {
          it->second.erase(d.version);
          if (it->second.empty()) services_.erase(it);
        }
      } else {
        ++skipped_lines_;
      }
    } catch (const std::exception&) {
      ++skipped_lines_;
    }
  }
}

void Catalogue::append_journal(std::string_view op, const ServiceDescriptor& d) {
  if (!journal_) return;
  if (journal_->has_parent_path()) std::filesystem::create_directories(journal_->parent_path());
  std::ofstream out(*journal_, std::ios::app | std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot append to catalogue journal");
  json event = {{"op", op}, {"descriptor", descriptor_to_json(d)}};
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::kIoError, "cannot append to catalogue journal");
}

CatalogueEntryId Catalogue::register_service(const ServiceDescriptor& descriptor) {
  auto reasons = check_descriptor(descriptor);
  if (!reasons.empty()) {
    json details = json::array();
    for (const auto& [field, reason] : reasons) {
      details.push_back({{"field", field}, {"reason", reason}});
    }
    throw Error(Errc::kInvalidDescriptor, "invalid service descriptor: " + reasons.front().first,
                {{"reasons", details}});
  }
  std::unique_lock lock(mutex_);
  auto it = services_.find(descriptor.name);
  if (it != services_.end() && it->second.count(descriptor.version)) {
    throw Error(Errc::kDuplicateService,
                "service " + descriptor.name + "@" + descriptor.version + " already registered",
                {{"name", descriptor.name}, {"version", descriptor.version}});
  }
  append_journal("register", descriptor);
  services_[descriptor.name][descriptor.version] = descriptor;
  return {descriptor.name, descriptor.version};
}

ServiceDescriptor Catalogue::get_service(std::string_view name,
                                         std::optional<std::string_view> version) const {
  std::shared_lock lock(mutex_);
  auto it = services_.find(name);
  if (it != services_.end() && !it->second.empty()) {
    if (!version) return std::prev(it->second.end())->second;
    auto v = it->second.find(std::string(*version));
    if (v != it->second.end()) return v->second;
  }
  std::string id(name);
  if (version) id += "@" + std::string(*version);
  throw Error(Errc::kNotFound, "service not found: " + id, {{"service", id}});
}

std::vector<ServiceDescriptor> Catalogue::list_services(const ServiceFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<ServiceDescriptor> out;
  for (const auto& [name, versions] : services_) {
    for (const auto& [version, d] : versions) {
      if (filter.kind && d.kind != *filter.kind) continue;
      if (filter.tag && !d.tags.count(*filter.tag)) continue;
      if (filter.text && d.name.find(*filter.text) == std::string::npos &&
          d.description.find(*filter.text) == std::string::npos) {
        continue;
      }
      out.push_back(d);
    }
  }
  return out;
}

void Catalogue::unregister_service(std::string_view name, std::string_view version,
                                   const InUsePredicate& in_use) {
  std::unique_lock lock(mutex_);
  auto it = services_.find(name);
  std::string id = std::string(name) + "@" + std::string(version);
  if (it == services_.end()) throw Error(Errc::kNotFound, "service not found: " + id, {{"service", id}});
  auto v = it->second.find(std::string(version));
  if (v == it->second.end()) throw Error(Errc::kNotFound, "service not found: " + id, {{"service", id}});
  if (in_use && in_use(std::string(name), std::string(version))) {
    throw Error(Errc::kInUse, "service " + id + " is referenced by a workflow", {{"service", id}});
  }
  append_journal("unregister", v->second);
  it->second.erase(v);
  if (it->second.empty()) services_.erase(it);
}

std::size_t Catalogue::size() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [name, versions] : services_) n += versions.size();
  return n;
}

}  // namespace flowforge

#include "flowforge/optimizer/space.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "flowforge/error.hpp"

namespace flowforge::opt {

using nlohmann::json;

namespace {

std::string_view domain_kind_name(DomainKind kind) {
  switch (kind) {
    case DomainKind::kIntRange: return "intRange";
    case DomainKind::kFloatRange: return "floatRange";
    case DomainKind::kCategorical: return "categorical";
    case DomainKind::kBoolean: return "boolean";
  }
  return "floatRange";
}

DomainKind parse_domain_kind(const std::string& s) {
  if (s == "intRange") return DomainKind::kIntRange;
  if (s == "floatRange") return DomainKind::kFloatRange;
  if (s == "categorical") return DomainKind::kCategorical;
  if (s == "boolean") return DomainKind::kBoolean;
  throw Error(Errc::kInvalidSpace, "unknown domain kind '" + s + "'");
}

double clamp01(double u) { return std::clamp(u, 0.0, 1.0); }

}  // namespace

std::size_t ParamDomain::cardinality() const {
  return kind == DomainKind::kBoolean ? 2 : values.size();
}

bool ParamDomain::contains(const Value& v) const {
  switch (kind) {
    case DomainKind::kIntRange: {
      const auto* i = std::get_if<std::int64_t>(&v);
      return i && static_cast<double>(*i) >= lo && static_cast<double>(*i) <= hi;
    }
    case DomainKind::kFloatRange: {
      const auto* d = std::get_if<double>(&v);
      return d && std::isfinite(*d) && *d >= lo && *d <= hi;
    }
    case DomainKind::kCategorical: {
      const auto* s = std::get_if<std::string>(&v);
      return s && std::find(values.begin(), values.end(), *s) != values.end();
    }
    case DomainKind::kBoolean:
      return std::holds_alternative<bool>(v);
  }
  return false;
}

double ParamDomain::normalize(const Value& v) const {
  switch (kind) {
    case DomainKind::kIntRange:
    case DomainKind::kFloatRange: {
      double x = value_as_double(v);
      if (scale == Scale::kLog) return (std::log(x) - std::log(lo)) / (std::log(hi) - std::log(lo));
      return (x - lo) / (hi - lo);
    }
    case DomainKind::kCategorical: {
      const auto& s = std::get<std::string>(v);
      auto idx = std::find(values.begin(), values.end(), s) - values.begin();
      return static_cast<double>(idx) / static_cast<double>(values.size() - 1);
    }
    case DomainKind::kBoolean:
      return std::get<bool>(v) ? 1.0 : 0.0;
  }
  return 0.0;
}

Value ParamDomain::denormalize(double u) const {
  u = clamp01(u);
  switch (kind) {
    case DomainKind::kIntRange:
    case DomainKind::kFloatRange: {
      double x = scale == Scale::kLog ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)))
                                      : lo + u * (hi - lo);
      x = std::clamp(x, lo, hi);
      if (kind == DomainKind::kIntRange) {
        auto i = static_cast<std::int64_t>(std::llround(x));
        i = std::clamp(i, static_cast<std::int64_t>(std::ceil(lo)),
                       static_cast<std::int64_t>(std::floor(hi)));
        return i;
      }
      return x;
    }
    case DomainKind::kCategorical:
    case DomainKind::kBoolean: {
      auto card = cardinality();
      auto idx = std::min(card - 1, static_cast<std::size_t>(std::floor(u * static_cast<double>(card))));
      if (kind == DomainKind::kBoolean) return idx == 1;
      return values[idx];
    }
  }
  return 0.0;
}

std::int64_t ConfigurationPoint::get_int(std::string_view name) const {
  auto it = assignment.find(std::string(name));
  if (it == assignment.end() || !std::holds_alternative<std::int64_t>(it->second)) {
    throw Error(Errc::kInvalidArgument, "configuration has no int value '" + std::string(name) + "'");
  }
  return std::get<std::int64_t>(it->second);
}

double ConfigurationPoint::get_float(std::string_view name) const {
  auto it = assignment.find(std::string(name));
  if (it == assignment.end()) {
    throw Error(Errc::kInvalidArgument, "configuration has no value '" + std::string(name) + "'");
  }
  return value_as_double(it->second);
}

const std::string& ConfigurationPoint::get_string(std::string_view name) const {
  auto it = assignment.find(std::string(name));
  if (it == assignment.end() || !std::holds_alternative<std::string>(it->second)) {
    throw Error(Errc::kInvalidArgument, "configuration has no string value '" + std::string(name) + "'");
  }
  return std::get<std::string>(it->second);
}

bool ConfigurationPoint::get_bool(std::string_view name) const {
  auto it = assignment.find(std::string(name));
  if (it == assignment.end() || !std::holds_alternative<bool>(it->second)) {
    throw Error(Errc::kInvalidArgument, "configuration has no bool value '" + std::string(name) + "'");
  }
  return std::get<bool>(it->second);
}

ParameterSpace::ParameterSpace(std::vector<ParamDomain> dims) : dims_(std::move(dims)) {
  std::set<std::string> names;
  for (const auto& d : dims_) {
    auto fail = [&](const std::string& why) {
      throw Error(Errc::kInvalidSpace, "dimension '" + d.name + "': " + why, {{"dim", d.name}});
    };
    if (d.name.empty() || !names.insert(d.name).second) fail("names must be unique and non-empty");
    switch (d.kind) {
      case DomainKind::kIntRange:
      case DomainKind::kFloatRange:
        if (!(d.lo < d.hi)) fail("lo must be below hi");
        if (d.scale == Scale::kLog && !(d.lo > 0)) fail("log scale needs lo > 0");
        if (d.kind == DomainKind::kIntRange &&
            (d.lo != std::floor(d.lo) || d.hi != std::floor(d.hi))) {
          fail("integer bounds must be whole numbers");
        }
        break;
      case DomainKind::kCategorical:
        if (d.values.size() < 2) fail("categorical needs at least two values");
        if (std::set<std::string>(d.values.begin(), d.values.end()).size() != d.values.size()) {
          fail("categorical values must be distinct");
        }
        break;
      case DomainKind::kBoolean:
        break;
    }
    if (!d.contains(d.default_value)) fail("default is outside the domain");
  }
}

const ParamDomain& ParameterSpace::dim(std::string_view name) const {
  for (const auto& d : dims_) {
    if (d.name == name) return d;
  }
  throw Error(Errc::kInvalidArgument, "unknown dimension '" + std::string(name) + "'");
}

ConfigurationPoint ParameterSpace::denormalize(std::span<const double> unit) const {
  if (unit.size() != dims_.size()) throw Error(Errc::kInvalidArgument, "dimension mismatch");
  ConfigurationPoint p;
  p.normalized.reserve(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    Value v = dims_[i].denormalize(unit[i]);
    p.normalized.push_back(dims_[i].normalize(v));
    p.assignment.emplace(dims_[i].name, std::move(v));
  }
  return p;
}

ConfigurationPoint ParameterSpace::make_point(std::map<std::string, Value> assignment) const {
  ConfigurationPoint p;
  for (const auto& d : dims_) {
    auto it = assignment.find(d.name);
    if (it == assignment.end()) {
      throw Error(Errc::kInvalidSpace, "missing value for '" + d.name + "'", {{"dim", d.name}});
    }
    // Whole-number floats are accepted for int dims (JSON has one number type).
    if (d.kind == DomainKind::kIntRange && std::holds_alternative<double>(it->second)) {
      double x = std::get<double>(it->second);
      if (x == std::floor(x)) it->second = static_cast<std::int64_t>(x);
    }
    if (d.kind == DomainKind::kFloatRange && std::holds_alternative<std::int64_t>(it->second)) {
      it->second = static_cast<double>(std::get<std::int64_t>(it->second));
    }
    if (!d.contains(it->second)) {
      throw Error(Errc::kInvalidSpace, "value for '" + d.name + "' is outside its domain",
                  {{"dim", d.name}});
    }
    p.normalized.push_back(d.normalize(it->second));
  }
  if (assignment.size() != dims_.size()) {
    throw Error(Errc::kInvalidSpace, "assignment has values for unknown dimensions");
  }
  p.assignment = std::move(assignment);
  return p;
}

ConfigurationPoint ParameterSpace::default_point() const {
  std::map<std::string, Value> assignment;
  for (const auto& d : dims_) assignment.emplace(d.name, d.default_value);
  return make_point(std::move(assignment));
}

std::vector<ConfigurationPoint> sample_configs(const ParameterSpace& space, std::size_t n,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ConfigurationPoint> out;
  out.reserve(n);
  std::vector<double> unit(space.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& u : unit) u = unit_uniform(rng);
    out.push_back(space.denormalize(unit));
  }
  return out;
}

ParameterSpace spark_like_space() {
  std::vector<ParamDomain> dims;
  dims.push_back({"executor_instances", DomainKind::kIntRange, 1, 16, Scale::kLinear, {},
                  std::int64_t{2}});
  dims.push_back({"executor_cores", DomainKind::kIntRange, 1, 8, Scale::kLinear, {}, std::int64_t{1}});
  dims.push_back({"executor_memory_mb", DomainKind::kIntRange, 512, 16384, Scale::kLog, {},
                  std::int64_t{1024}});
  dims.push_back({"shuffle_partitions", DomainKind::kIntRange, 8, 512, Scale::kLog, {},
                  std::int64_t{200}});
  dims.push_back({"serializer", DomainKind::kCategorical, 0, 1, Scale::kLinear, {"java", "kryo"},
                  std::string("java")});
  dims.push_back({"compress", DomainKind::kBoolean, 0, 1, Scale::kLinear, {}, false});
  return ParameterSpace(std::move(dims));
}

json space_to_json(const ParameterSpace& space) {
  json dims = json::array();
  for (const auto& d : space.dims()) {
    json jd = {{"name", d.name}, {"kind", domain_kind_name(d.kind)}, {"default", value_to_json(d.default_value)}};
    if (d.kind == DomainKind::kIntRange || d.kind == DomainKind::kFloatRange) {
      jd["lo"] = d.lo;
      jd["hi"] = d.hi;
      jd["scale"] = d.scale == Scale::kLog ? "log" : "linear";
    }
    if (d.kind == DomainKind::kCategorical) jd["values"] = d.values;
    dims.push_back(std::move(jd));
  }
  return {{"dims", dims}};
}

ParameterSpace space_from_json(const json& j) {
  try {
    std::vector<ParamDomain> dims;
    for (const auto& jd : j.at("dims")) {
      ParamDomain d;
      d.name = jd.at("name").get<std::string>();
      d.kind = parse_domain_kind(jd.at("kind").get<std::string>());
      const auto& def = jd.at("default");
      switch (d.kind) {
        case DomainKind::kIntRange:
        case DomainKind::kFloatRange:
          d.lo = jd.at("lo").get<double>();
          d.hi = jd.at("hi").get<double>();
          d.scale = jd.value("scale", "linear") == "log" ? Scale::kLog : Scale::kLinear;
          if (d.kind == DomainKind::kIntRange) {
            if (!def.is_number()) throw Error(Errc::kInvalidSpace, "default must be a number");
            d.default_value = static_cast<std::int64_t>(std::llround(def.get<double>()));
          } else {
            d.default_value = def.get<double>();
          }
          break;
        case DomainKind::kCategorical:
          d.values = jd.at("values").get<std::vector<std::string>>();
          d.default_value = def.get<std::string>();
          break;
        case DomainKind::kBoolean:
          d.default_value = def.get<bool>();
          break;
      }
      dims.push_back(std::move(d));
    }
    return ParameterSpace(std::move(dims));
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidSpace, std::string("malformed parameter space: ") + e.what());
  }
}

json assignment_to_json(const std::map<std::string, Value>& assignment) {
  json out = json::object();
  for (const auto& [k, v] : assignment) out[k] = value_to_json(v);
  return out;
}

json point_to_json(const ConfigurationPoint& point) {
  return {{"assignment", assignment_to_json(point.assignment)}, {"normalized", point.normalized}};
}

ConfigurationPoint point_from_json(const ParameterSpace& space, const json& j) {
  const json& a = j.contains("assignment") ? j["assignment"] : j;
  if (!a.is_object()) throw Error(Errc::kInvalidSpace, "assignment must be an object");
  std::map<std::string, Value> assignment;
  for (const auto& d : space.dims()) {
    if (!a.contains(d.name)) continue;
    const auto& v = a[d.name];
    if (v.is_boolean()) {
      assignment.emplace(d.name, v.get<bool>());
    } else if (v.is_number_integer()) {
      assignment.emplace(d.name, v.get<std::int64_t>());
    } else if (v.is_number()) {
      assignment.emplace(d.name, v.get<double>());
    } else if (v.is_string()) {
      assignment.emplace(d.name, v.get<std::string>());
    } else {
      throw Error(Errc::kInvalidSpace, "unsupported value for '" + d.name + "'");
    }
  }
  for (const auto& [k, v] : a.items()) {
    if (!assignment.count(k)) throw Error(Errc::kInvalidSpace, "unknown dimension '" + k + "'");
  }
  return space.make_point(std::move(assignment));
}

}  // namespace flowforge::opt

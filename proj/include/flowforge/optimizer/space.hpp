#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowforge/frame.hpp"

namespace flowforge::opt {

enum class DomainKind { kIntRange, kFloatRange, kCategorical, kBoolean };
enum class Scale { kLinear, kLog };

/// One tunable knob. Int values are int64, floats double, categorical values
/// strings, booleans bool.
struct ParamDomain {
  std::string name;
  DomainKind kind = DomainKind::kFloatRange;
  double lo = 0.0;
  double hi = 1.0;
  Scale scale = Scale::kLinear;
  std::vector<std::string> values;
  Value default_value;

  std::size_t cardinality() const;  // categorical/boolean only
  bool contains(const Value& v) const;
  double normalize(const Value& v) const;
  Value denormalize(double u) const;
};

struct ConfigurationPoint {
  std::map<std::string, Value> assignment;
  /// Position in [0,1]^d, derived from the assignment.
  std::vector<double> normalized;

  std::int64_t get_int(std::string_view name) const;
  double get_float(std::string_view name) const;
  const std::string& get_string(std::string_view name) const;
  bool get_bool(std::string_view name) const;

  bool operator==(const ConfigurationPoint& other) const { return assignment == other.assignment; }
};

class ParameterSpace {
 public:
  ParameterSpace() = default;
  /// Throws kInvalidSpace when a domain breaks its invariants.
  explicit ParameterSpace(std::vector<ParamDomain> dims);

  const std::vector<ParamDomain>& dims() const { return dims_; }
  std::size_t size() const { return dims_.size(); }
  const ParamDomain& dim(std::string_view name) const;

  /// Maps a vector in [0,1]^d onto the domains (ints rounded, categoricals
  /// bucketed) and recomputes the normalized position from the snapped values.
  ConfigurationPoint denormalize(std::span<const double> unit) const;
  /// Throws kInvalidSpace if any value is missing or out of domain.
  ConfigurationPoint make_point(std::map<std::string, Value> assignment) const;
  ConfigurationPoint default_point() const;

 private:
  std::vector<ParamDomain> dims_;
};

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// The random-tunings stage: N points drawn independently and uniformly per
/// dimension in normalized space (so log dims are uniform in log space).
std::vector<ConfigurationPoint> sample_configs(const ParameterSpace& space, std::size_t n,
                                               std::uint64_t seed);

/// Six-knob Spark-like deployment space used by the simulated cost surface.
ParameterSpace spark_like_space();

nlohmann::json space_to_json(const ParameterSpace& space);
ParameterSpace space_from_json(const nlohmann::json& j);
nlohmann::json point_to_json(const ConfigurationPoint& point);
ConfigurationPoint point_from_json(const ParameterSpace& space, const nlohmann::json& j);
/// Assignment object only, {"name": value, ...}.
nlohmann::json assignment_to_json(const std::map<std::string, Value>& assignment);

}  // namespace flowforge::opt

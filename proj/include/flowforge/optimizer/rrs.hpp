#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowforge/optimizer/space.hpp"

namespace flowforge::opt {

struct RrsParams {
  double p = 0.1;         // top fraction the exploration aims to hit
  double q = 0.99;        // confidence of hitting it
  double c = 0.5;         // shrink factor
  std::size_t l = 8;      // consecutive failures before shrinking
  double rho_min = 0.01;  // half-width that ends an exploit phase
  std::size_t eval_budget = 500;
  std::uint64_t seed = 0;
};

/// ceil(ln(1 - q) / ln(1 - p)).
std::size_t exploration_size(double p, double q);

/// Throws kInvalidArgument for out-of-range values and kBudgetTooSmall when
/// the budget cannot cover one exploration.
void check_rrs_params(const RrsParams& params);

struct TraceEntry {
  std::string phase;  // "explore" or "exploit"
  ConfigurationPoint point;
  double value = 0.0;
  double best_so_far = 0.0;
  std::optional<double> half_width;  // exploit only
};

struct RrsResult {
  ConfigurationPoint best;
  double best_value = 0.0;
  std::vector<TraceEntry> trace;
};

using Objective = std::function<double(const ConfigurationPoint&)>;

/// Recursive random search minimizing `objective`. Every evaluated point is
/// snapped onto the space, so it lies in [0,1]^d.
RrsResult rrs_search(const Objective& objective, const ParameterSpace& space, const RrsParams& params);

/// Pure uniform sampling with the same budget; a baseline for comparisons.
RrsResult random_search(const Objective& objective, const ParameterSpace& space,
                        std::size_t budget, std::uint64_t seed);

nlohmann::json rrs_params_to_json(const RrsParams& params);
/// Missing keys keep their defaults.
RrsParams rrs_params_from_json(const nlohmann::json& j, RrsParams base = {});
nlohmann::json trace_to_json(const std::vector<TraceEntry>& trace);

}  // namespace flowforge::opt

#include "flowforge/optimizer/rrs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "flowforge/error.hpp"

namespace flowforge::opt {

using nlohmann::json;

std::size_t exploration_size(double p, double q) {
  if (!(p > 0.0 && p < 1.0) || !(q > 0.0 && q < 1.0)) {
    throw Error(Errc::kInvalidArgument, "p and q must lie in (0, 1)");
  }
  double n = std::log(1.0 - q) / std::log(1.0 - p);
  return static_cast<std::size_t>(std::ceil(n - 1e-12));
}

void check_rrs_params(const RrsParams& params) {
  auto n = exploration_size(params.p, params.q);
  if (!(params.c > 0.0 && params.c < 1.0)) throw Error(Errc::kInvalidArgument, "c must lie in (0, 1)");
  if (params.l < 1) throw Error(Errc::kInvalidArgument, "l must be at least 1");
  if (!(params.rho_min > 0.0 && params.rho_min < 1.0)) {
    throw Error(Errc::kInvalidArgument, "rho_min must lie in (0, 1)");
  }
  if (params.eval_budget < n) {
    throw Error(Errc::kBudgetTooSmall,
                "budget " + std::to_string(params.eval_budget) + " is below the exploration size " +
                    std::to_string(n),
                {{"budget", params.eval_budget}, {"exploration_size", n}});
  }
}

namespace {

class Search {
 public:
  Search(const Objective& objective, const ParameterSpace& space, std::size_t budget, std::uint64_t seed)
      : objective_(objective), space_(space), budget_(budget), rng_(seed) {}

  bool exhausted() const { return result_.trace.size() >= budget_; }

  const TraceEntry& evaluate(std::span<const double> unit, const char* phase, std::optional<double> w) {
    auto point = space_.denormalize(unit);
    double value = objective_(point);
    if (result_.trace.empty() || value < result_.best_value) {
      result_.best_value = value;
      result_.best = point;
    }
    result_.trace.push_back({phase, std::move(point), value, result_.best_value, w});
    return result_.trace.back();
  }

  std::vector<double> uniform() {
    std::vector<double> u(space_.size());
    for (auto& x : u) x = unit_uniform(rng_);
    return u;
  }

  // Uniform inside the box of half-width w around center, clipped to the
  // unit cube. Categorical and boolean dims pick among the values whose
  // normalized index falls inside the interval.
  std::vector<double> around(const std::vector<double>& center, double w) {
    std::vector<double> u(center.size());
    for (std::size_t i = 0; i < center.size(); ++i) {
      double lo = std::max(0.0, center[i] - w);
      double hi = std::min(1.0, center[i] + w);
      const auto& d = space_.dims()[i];
      if (d.kind == DomainKind::kCategorical || d.kind == DomainKind::kBoolean) {
        auto card = d.cardinality();
        std::vector<std::size_t> inside;
        for (std::size_t v = 0; v < card; ++v) {
          double pos = static_cast<double>(v) / static_cast<double>(card - 1);
          if (pos >= lo - 1e-12 && pos <= hi + 1e-12) inside.push_back(v);
        }
        if (inside.empty()) {
          u[i] = center[i];
          continue;
        }
        auto pick = inside[std::min(inside.size() - 1,
                                    static_cast<std::size_t>(unit_uniform(rng_) * static_cast<double>(inside.size())))];
        // The bucket midpoint denormalizes back to the chosen value.
        u[i] = (static_cast<double>(pick) + 0.5) / static_cast<double>(card);
      } else {
        u[i] = lo + unit_uniform(rng_) * (hi - lo);
      }
    }
    return u;
  }

  RrsResult take() { return std::move(result_); }

 private:
  const Objective& objective_;
  const ParameterSpace& space_;
  std::size_t budget_;
  std::mt19937_64 rng_;
  RrsResult result_;
};

}  // namespace

RrsResult rrs_search(const Objective& objective, const ParameterSpace& space, const RrsParams& params) {
  check_rrs_params(params);
  if (space.size() == 0) throw Error(Errc::kInvalidSpace, "space has no dimensions");
  const std::size_t n = exploration_size(params.p, params.q);
  const double w0 = std::pow(params.p, 1.0 / static_cast<double>(space.size())) / 2.0;
  Search search(objective, space, params.eval_budget, params.seed);

  while (!search.exhausted()) {
    std::optional<TraceEntry> local;
    for (std::size_t i = 0; i < n && !search.exhausted(); ++i) {
      const auto& e = search.evaluate(search.uniform(), "explore", std::nullopt);
      if (!local || e.value < local->value) local = e;
    }
    if (!local) break;

    double w = w0;
    std::size_t fails = 0;
    while (!search.exhausted() && w >= params.rho_min) {
      const auto& e = search.evaluate(search.around(local->point.normalized, w), "exploit", w);
      if (e.value < local->value) {
        local = e;
        fails = 0;
      } else if (++fails >= params.l) {
        w *= params.c;
        fails = 0;
      }
    }
  }
  return search.take();
}

RrsResult random_search(const Objective& objective, const ParameterSpace& space, std::size_t budget,
                        std::uint64_t seed) {
  if (budget == 0) throw Error(Errc::kBudgetTooSmall, "budget must be positive");
  Search search(objective, space, budget, seed);
  while (!search.exhausted()) search.evaluate(search.uniform(), "explore", std::nullopt);
  return search.take();
}

json rrs_params_to_json(const RrsParams& p) {
  return {{"p", p.p},   {"q", p.q},           {"c", p.c},
          {"l", p.l},   {"rho_min", p.rho_min}, {"eval_budget", p.eval_budget},
          {"seed", p.seed}};
}

RrsParams rrs_params_from_json(const json& j, RrsParams base) {
  if (!j.is_object()) throw Error(Errc::kInvalidArgument, "rrs params must be an object");
  try {
    base.p = j.value("p", base.p);
    base.q = j.value("q", base.q);
    base.c = j.value("c", base.c);
    base.l = j.value("l", base.l);
    base.rho_min = j.value("rho_min", base.rho_min);
    base.eval_budget = j.value("eval_budget", base.eval_budget);
    base.seed = j.value("seed", base.seed);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("malformed rrs params: ") + e.what());
  }
  return base;
}

json trace_to_json(const std::vector<TraceEntry>& trace) {
  json out = json::array();
  for (const auto& e : trace) {
    out.push_back({{"phase", e.phase},
                   {"point", assignment_to_json(e.point.assignment)},
                   {"normalized", e.point.normalized},
                   {"value", e.value},
                   {"best_so_far", e.best_so_far},
                   {"half_width", e.half_width ? json(*e.half_width) : json(nullptr)}});
  }
  return out;
}

}  // namespace flowforge::opt

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowforge/catalogue.hpp"

namespace flowforge {

enum class WorkflowMode { kStream, kBatch };

std::string_view mode_name(WorkflowMode mode);
std::optional<WorkflowMode> parse_mode(std::string_view name);

struct NodeSpec {
  std::string id;
  std::string service;
  std::optional<std::string> version;
  std::map<std::string, std::string> bindings;

  bool operator==(const NodeSpec&) const = default;
};

struct Edge {
  std::string from;
  std::string to;

  auto operator<=>(const Edge&) const = default;
};

struct WorkflowDefinition {
  std::string name;
  WorkflowMode mode = WorkflowMode::kStream;
  std::vector<NodeSpec> nodes;
  /// Sorted by (position of from, position of to) when produced by the parser.
  std::vector<Edge> edges;

  const NodeSpec* find_node(std::string_view id) const;
  bool operator==(const WorkflowDefinition&) const = default;
};

struct ValidatedWorkflow {
  WorkflowDefinition definition;
  std::map<std::string, ServiceDescriptor> resolved;
  /// Coerced bindings per node id, with defaults filled in.
  std::map<std::string, std::map<std::string, Value>> bindings;
};

nlohmann::json definition_to_json(const WorkflowDefinition& def);
WorkflowDefinition definition_from_json(const nlohmann::json& j);
nlohmann::json validated_to_json(const ValidatedWorkflow& vw);

namespace dsl {

/// stream := node ('|' node)+
/// node   := [label ':'] service ['@' version] ('--' key '=' value)*
///
/// Values are bare words or double-quoted strings with \" and \\ escapes.
/// Throws kSyntaxError with line/column details at the first error.
WorkflowDefinition parse_stream(std::string_view text, std::string name = {});

/// task := term ('&&' term)*
/// term := node | '<' task ('||' task)+ '>'
///
/// `&&` connects every exit of the left side to every entry of the right;
/// a split's branches all run after the preceding term and before the next.
WorkflowDefinition parse_task(std::string_view text, std::string name = {});

WorkflowDefinition parse(std::string_view text, WorkflowMode mode, std::string name = {});

/// Structural invariants: unique ids, edges between known nodes, acyclic,
/// stream definitions a single chain in node order. Throws kInvalidWorkflow.
void check_definition(const WorkflowDefinition& def);

/// Node ids in a deterministic topological order (ties by node position).
std::vector<std::string> topological_order(const WorkflowDefinition& def);

/// Resolves every node against the catalogue, enforces kind rules per mode
/// and coerces bindings, filling defaults for unbound optional params.
ValidatedWorkflow validate(const WorkflowDefinition& def, const Catalogue& catalogue);

/// Canonical text. Batch graphs must be series-parallel in the sense of the
/// task grammar; other DAGs throw kInvalidWorkflow.
std::string serialize(const WorkflowDefinition& def);

/// Double-quotes a binding value only when a bare word cannot carry it.
std::string quote_value(std::string_view value);

}  // namespace dsl
}  // namespace flowforge

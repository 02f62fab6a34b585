#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/catalogue.hpp"
#include "flowforge/frame.hpp"
#include "flowforge/optimizer/space.hpp"
#include "flowforge/operators/table_store.hpp"

namespace flowforge {

using Bindings = std::map<std::string, Value>;

struct OperatorContext {
  std::string workflow;
  std::string node_id;
  bool streaming = false;
  TableStore* tables = nullptr;
  /// Only workload operators read the deployment configuration.
  const opt::ConfigurationPoint* deployment_config = nullptr;
};

/// How a processor's output row count relates to its input.
enum class Conservation { kNone, kOneToOne, kFiltering };

/// Common interface of in-process operators.
///
/// Batch nodes get one process() call with every predecessor's output; stream
/// processors and sinks get one call per incoming batch. Stream sources are
/// driven through next_batch() instead.
class Operator {
 public:
  virtual ~Operator() = default;

  virtual void setup(const Bindings& bindings, const OperatorContext& context) {
    (void)bindings;
    (void)context;
  }
  virtual std::vector<TableFrame> process(std::span<const TableFrame> inputs) = 0;
  virtual std::optional<TableFrame> next_batch() { return std::nullopt; }
  /// For stream sources: no further batches will be produced.
  virtual bool exhausted() const { return true; }
  virtual void teardown() {}
  virtual Conservation conservation() const { return Conservation::kNone; }
};

using OperatorFactory = std::function<std::unique_ptr<Operator>()>;

/// Implementation lookup by artifact reference (`builtin:<impl>`).
class OperatorRegistry {
 public:
  void add(std::string impl, OperatorFactory factory);
  bool contains(std::string_view impl) const;
  /// Throws kOperatorInitError for unknown references.
  std::unique_ptr<Operator> create(const ServiceDescriptor& descriptor) const;

  /// Registry holding every builtin operator.
  static const OperatorRegistry& builtins();

 private:
  std::map<std::string, OperatorFactory, std::less<>> factories_;
};

/// Catalogue descriptors for the builtin operators (framework "builtin").
std::vector<ServiceDescriptor> builtin_descriptors();

/// Reads a comma-separated list binding, skipping empty items.
std::vector<std::string> split_list(std::string_view text);

}  // namespace flowforge

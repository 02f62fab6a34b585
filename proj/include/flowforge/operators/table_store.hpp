#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/frame.hpp"

namespace flowforge {

/// Named tables kept as `<dir>/<name>.jsonl`, one frame envelope per line.
class TableStore {
 public:
  explicit TableStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  /// Replaces any prior table of that name.
  void write(std::string_view name, const TableFrame& frame);
  /// Appends rows; creates the table when absent. Schemas must match.
  void append(std::string_view name, const TableFrame& frame);
  TableFrame read(std::string_view name) const;
  bool exists(std::string_view name) const;
  std::vector<std::string> list() const;
  std::filesystem::path path_of(std::string_view name) const;

  static bool valid_name(std::string_view name);

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

}  // namespace flowforge

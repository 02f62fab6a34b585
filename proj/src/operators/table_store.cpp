#include "flowforge/operators/table_store.hpp"

#include <algorithm>
#include <fstream>

#include "flowforge/error.hpp"

namespace flowforge {

TableStore::TableStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

bool TableStore::valid_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  });
}

std::filesystem::path TableStore::path_of(std::string_view name) const {
  if (!valid_name(name)) {
    throw Error(Errc::kInvalidArgument, "invalid table name '" + std::string(name) + "'");
  }
  return dir_ / (std::string(name) + ".jsonl");
}

void TableStore::write(std::string_view name, const TableFrame& frame) {
  auto path = path_of(name);
  std::lock_guard lock(mutex_);
  std::filesystem::create_directories(dir_);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIoError, "cannot write table " + path.string());
    out << encode_frame(frame) << '\n';
    if (!out) throw Error(Errc::kIoError, "cannot write table " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void TableStore::append(std::string_view name, const TableFrame& frame) {
  auto path = path_of(name);
  std::lock_guard lock(mutex_);
  std::filesystem::create_directories(dir_);
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::string first;
    std::getline(in, first);
    if (!first.empty() && decode_frame(first).schema() != frame.schema()) {
      throw Error(Errc::kSchemaMismatch, "append to table '" + std::string(name) + "' with a different schema");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::kIoError, "cannot write table " + path.string());
  out << encode_frame(frame) << '\n';
}

TableFrame TableStore::read(std::string_view name) const {
  auto path = path_of(name);
  std::lock_guard lock(mutex_);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "table not found: " + std::string(name), {{"table", std::string(name)}});
  TableFrame out;
  bool first = true;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto frame = decode_frame(line);
    if (first) {
      out = std::move(frame);
      first = false;
    } else {
      out.append(frame);
    }
  }
  return out;
}

bool TableStore::exists(std::string_view name) const {
  return valid_name(name) && std::filesystem::exists(path_of(name));
}

std::vector<std::string> TableStore::list() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  if (!std::filesystem::exists(dir_)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      out.push_back(entry.path().stem().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace flowforge

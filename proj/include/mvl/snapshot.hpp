#pragma once

#include <map>
#include <string>
#include <vector>

#include "mvl/matrix.hpp"

namespace mvl {

// Versioned binary artifact: string metadata plus named double tensors in a
// fixed order. Writing and re-reading is bit-exact.
struct Snapshot {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> tensors;

  void add(const std::string& name, const Matrix& m) { tensors.emplace_back(name, m); }
  const Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::string& meta_at(const std::string& key) const;
  int meta_int(const std::string& key) const;
};

void save_snapshot(const Snapshot& snap, const std::string& path);
Snapshot load_snapshot(const std::string& path);

}  // namespace mvl

#include "mvl/snapshot.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mvl {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'L', 'S', 'N', 'A', 'P', '1'};

void write_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

const Matrix& Snapshot::get(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw std::runtime_error("snapshot: missing tensor '" + name + "'");
}

bool Snapshot::has(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return true;
  }
  return false;
}

const std::string& Snapshot::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("snapshot: missing meta key '" + key + "'");
  return it->second;
}

int Snapshot::meta_int(const std::string& key) const { return std::stoi(meta_at(key)); }

void save_snapshot(const Snapshot& snap, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write snapshot: " + path);
  out.write(kMagic, 8);
  write_u32(out, static_cast<uint32_t>(snap.meta.size()));
  for (const auto& [k, v] : snap.meta) {
    write_string(out, k);
    write_string(out, v);
  }
  write_u32(out, static_cast<uint32_t>(snap.tensors.size()));
  for (const auto& [name, m] : snap.tensors) {
    write_string(out, name);
    write_u32(out, static_cast<uint32_t>(m.rows()));
    write_u32(out, static_cast<uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing snapshot: " + path);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a snapshot file: " + path);
  Snapshot snap;
  const uint32_t n_meta = read_u32(in);
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_string(in);
    snap.meta[k] = read_string(in);
  }
  const uint32_t n_tensors = read_u32(in);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = read_string(in);
    const uint32_t rows = read_u32(in);
    const uint32_t cols = read_u32(in);
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    snap.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (!in) throw std::runtime_error("truncated snapshot file: " + path);
  return snap;
}

}  // namespace mvl

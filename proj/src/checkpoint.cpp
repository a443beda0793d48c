// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint layout:
//
//   eanet-checkpoint 1
//   config <n>
//   <n lines of key=value>
//   tensors <m>
//   <m lines: name rank d0 d1 ...>
//   payload <total element count>
//   <raw little-endian float64 values, tensors in table order>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "eanet/error.hpp"
#include "eanet/model.hpp"
#include "src/text_util.hpp"

namespace eanet {

namespace {

constexpr const char* kMagic = "eanet-checkpoint";
constexpr int kVersion = 1;

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void write_doubles(std::ostream& os, std::span<const double> values) {
  for (double d : values) {
    std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
}

std::string expect_line(std::istream& is, const std::string& path) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path + ": truncated checkpoint header");
  return line;
}

std::size_t expect_count(std::istream& is, const std::string& keyword, const std::string& path) {
  std::istringstream ls(expect_line(is, path));
  std::string word;
  std::size_t n = 0;
  if (!(ls >> word >> n) || word != keyword)
    throw ParseError(path + ": expected '" + keyword + " <count>' in checkpoint header");
  return n;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  KeyValues kv = to_key_values(model.config);
  os << kMagic << ' ' << kVersion << '\n';
  os << "config " << kv.size() << '\n';
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
  auto params = model.parameters();
  std::size_t total = 0;
  os << "tensors " << params.size() << '\n';
  for (const auto& p : params) {
    os << p.name << ' ' << p.tensor.rank();
    for (std::size_t d : p.tensor.shape()) os << ' ' << d;
    os << '\n';
    total += p.tensor.numel();
  }
  os << "payload " << total << '\n';
  for (const auto& p : params) write_doubles(os, p.tensor.data());
  if (!os) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  {
    std::istringstream ls(expect_line(is, path));
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic)
      throw ParseError(path + ": not an eanet checkpoint");
    if (version != kVersion)
      throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  KeyValues kv;
  std::size_t n_config = expect_count(is, "config", path);
  for (std::size_t i = 0; i < n_config; ++i) {
    std::string line = expect_line(is, path);
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path + ": malformed config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig config = model_config_from_key_values(kv);
  Model model = Model::create(config, 0);

  struct Entry {
    std::string name;
    Shape shape;
  };
  std::vector<Entry> table;
  std::size_t n_tensors = expect_count(is, "tensors", path);
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::istringstream ls(expect_line(is, path));
    Entry e;
    std::size_t rank = 0;
    if (!(ls >> e.name >> rank)) throw ParseError(path + ": malformed tensor entry");
    e.shape.resize(rank);
    for (auto& d : e.shape)
      if (!(ls >> d)) throw ParseError(path + ": malformed shape for " + e.name);
    table.push_back(std::move(e));
  }
  std::size_t total = expect_count(is, "payload", path);

  auto params = model.parameters();
  if (params.size() != table.size())
    throw ParseError(path + ": tensor table has " + std::to_string(table.size()) +
                     " entries, configuration implies " + std::to_string(params.size()));
  std::size_t expected_total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != table[i].name || params[i].tensor.shape() != table[i].shape)
      throw ParseError(path + ": tensor '" + table[i].name + "' " + shape_str(table[i].shape) +
                       " does not match expected '" + params[i].name + "' " +
                       shape_str(params[i].tensor.shape()));
    expected_total += params[i].tensor.numel();
  }
  if (expected_total != total) throw ParseError(path + ": payload size disagrees with tensor table");
  for (auto& p : params) {
    auto values = p.tensor.mutable_data();
    for (double& v : values) {
      std::uint64_t bits = 0;
      if (!is.read(reinterpret_cast<char*>(&bits), sizeof(bits)))
        throw ParseError(path + ": truncated payload");
      v = std::bit_cast<double>(to_little(bits));
    }
  }
  return model;
}

}  // namespace eanet

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dublid/grid.hpp"

namespace dublid {

/// Dense row-major tensor of doubles, the payload of a DBLT container.
///
/// Container layout: "DBLT", u8 version (1), u8 rank, rank x u64 LE dims,
/// then prod(dims) x f64 LE samples.
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;

  std::uint64_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

Tensor to_tensor(const RealGrid& g);
RealGrid to_grid(const Tensor& t);  // rank must be 2

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

/// Manifest: u32 LE entry count, then per entry u16 LE name length, UTF-8
/// name bytes and a DBLT tensor.
void write_named(std::ostream& os, const NamedTensors& entries);
NamedTensors read_named(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);
void save_named(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors load_named(const std::filesystem::path& path);

/// Writes to `path.tmp` then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace dublid

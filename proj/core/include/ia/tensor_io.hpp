#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ia/tensor.hpp"

namespace ia {

// IATN binary tensor format: magic "IATN", u8 rank, rank x u32 little-endian
// extents, row-major f32 little-endian payload. Values round-trip through f32.
void save_iatn(const std::filesystem::path& file, const Tensor& t);
Tensor load_iatn(const std::filesystem::path& file);

void save_iatn_bytes(std::string& out, const Tensor& t);
Tensor load_iatn_bytes(const std::string& bytes);

// Relation-map sidecar: a text file holding `grid=HxW`.
void save_grid_sidecar(const std::filesystem::path& file, int64_t h, int64_t w);
std::pair<int64_t, int64_t> load_grid_sidecar(const std::filesystem::path& file);

// Named-tensor directory: tensors as <dir>/<entry>.iatn plus a manifest.tsv
// listing `name<TAB>file` in insertion order.
struct TensorManifest {
  std::vector<std::pair<std::string, Tensor>> entries;

  void add(std::string name, Tensor t) { entries.emplace_back(std::move(name), std::move(t)); }
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

void save_manifest_dir(const std::filesystem::path& dir, const TensorManifest& m);
TensorManifest load_manifest_dir(const std::filesystem::path& dir);

}  // namespace ia

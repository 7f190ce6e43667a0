#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ia/tensor.hpp"

namespace ia {

// Synthetic pedestrian images: a blocky figure whose part colors identify the
// person, rendered under per-image translation, scale and noise nuisances.
struct SyntheticSpec {
  int num_ids = 20;
  int images_per_id = 20;  // training images per identity
  int query_per_id = 2;
  int gallery_per_id = 2;
  int64_t canvas_h = 64;
  int64_t canvas_w = 32;
  double translation_max = 6.0;  // pixels, uniform in [-t, t] per axis
  double scale_min = 0.7;
  double scale_max = 1.3;
  double noise_std = 0.05;
  uint64_t seed = 1;

  void validate() const;
};

struct LabeledImages {
  Tensor images;            // [N, 3, H, W], values in [0,1]
  std::vector<int> labels;  // identity per image

  int64_t count() const { return labels.empty() ? 0 : images.extent(0); }
};

struct Dataset {
  LabeledImages train;
  LabeledImages query;
  LabeledImages gallery;
};

// Identity appearance factors, drawn once per identity.
struct IdentityFactors {
  int head_color;
  int torso_color;
  int leg_color;
  bool accessory;
  bool accessory_left;
};

constexpr int kPaletteSize = 8;

IdentityFactors sample_identity(Rng& rng);

// Query and gallery contain freshly drawn images of the same identities as
// the training split, never shared instances.
Dataset generate(const SyntheticSpec& spec);

// Renders one image of an identity with explicit nuisance parameters.
Tensor render_identity(const IdentityFactors& id, const SyntheticSpec& spec, double tx, double ty,
                       double scale, double noise_std, Rng& noise_rng);

void save_labeled_images(const std::filesystem::path& dir, const std::string& name,
                         const LabeledImages& set);
LabeledImages load_labeled_images(const std::filesystem::path& dir, const std::string& name);
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

// Gathers a batch [n,3,H,W] by index list.
LabeledImages gather(const LabeledImages& set, std::span<const int64_t> indices);

}  // namespace ia

#include "ia/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ia/tensor_io.hpp"

namespace ia {

void SyntheticSpec::validate() const {
  if (num_ids < 2) throw ConfigError("synthetic dataset needs num_ids >= 2");
  if (images_per_id < 1 || query_per_id < 1 || gallery_per_id < 1) {
    throw ConfigError("synthetic dataset needs at least one image per split per identity");
  }
  if (!(scale_min > 0.0) || scale_max < scale_min) {
    throw ConfigError("synthetic dataset needs 0 < scale_min <= scale_max");
  }
  if (translation_max < 0.0 || noise_std < 0.0) {
    throw ConfigError("synthetic dataset needs nonnegative translation and noise");
  }
  // The figure spans about half the canvas; below this it degenerates to
  // single-pixel parts even before scaling down.
  if (canvas_h < 32 || canvas_w < 16) {
    throw ConfigError("canvas " + std::to_string(canvas_h) + "x" + std::to_string(canvas_w) +
                      " too small for the figure at max scale");
  }
}

namespace {

// Bright, well-separated part colors.
constexpr double kPalette[kPaletteSize][3] = {
    {0.95, 0.15, 0.15}, {0.15, 0.85, 0.20}, {0.20, 0.25, 0.95}, {0.95, 0.85, 0.15},
    {0.90, 0.20, 0.90}, {0.15, 0.90, 0.90}, {0.95, 0.55, 0.15}, {0.85, 0.85, 0.85},
};

constexpr double kAccessoryColor[3] = {0.55, 0.35, 0.10};
constexpr double kBackground = 0.05;

// Figure layout in canvas fractions (reference canvas 64x32).
struct Rect {
  double y0, y1, x0, x1;
  bool contains(double fy, double fx) const { return fy >= y0 && fy < y1 && fx >= x0 && fx < x1; }
};

constexpr Rect kHead{6.0 / 64, 14.0 / 64, 12.0 / 32, 20.0 / 32};
constexpr Rect kTorso{14.0 / 64, 36.0 / 64, 8.0 / 32, 24.0 / 32};
constexpr Rect kLegL{36.0 / 64, 56.0 / 64, 9.0 / 32, 15.0 / 32};
constexpr Rect kLegR{36.0 / 64, 56.0 / 64, 17.0 / 32, 23.0 / 32};
constexpr Rect kBagL{22.0 / 64, 32.0 / 64, 2.0 / 32, 7.0 / 32};
constexpr Rect kBagR{22.0 / 64, 32.0 / 64, 25.0 / 32, 30.0 / 32};

}  // namespace

IdentityFactors sample_identity(Rng& rng) {
  IdentityFactors f;
  f.head_color = static_cast<int>(rng.uniform_int(kPaletteSize));
  f.torso_color = static_cast<int>(rng.uniform_int(kPaletteSize));
  f.leg_color = static_cast<int>(rng.uniform_int(kPaletteSize));
  f.accessory = rng.uniform() < 0.5;
  f.accessory_left = rng.uniform() < 0.5;
  return f;
}

Tensor render_identity(const IdentityFactors& id, const SyntheticSpec& spec, double tx, double ty,
                       double scale, double noise_std, Rng& noise_rng) {
  const int64_t h = spec.canvas_h, w = spec.canvas_w;
  Tensor img({3, h, w});
  const double cy = 0.5 * static_cast<double>(h);
  const double cx = 0.5 * static_cast<double>(w);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      // Pull the pixel center back through the scale/translation transform.
      const double vy = (static_cast<double>(y) + 0.5 - cy - ty) / scale + cy;
      const double vx = (static_cast<double>(x) + 0.5 - cx - tx) / scale + cx;
      const double fy = vy / static_cast<double>(h);
      const double fx = vx / static_cast<double>(w);
      const double* color = nullptr;
      if (kHead.contains(fy, fx)) {
        color = kPalette[id.head_color];
      } else if (id.accessory && (id.accessory_left ? kBagL : kBagR).contains(fy, fx)) {
        color = kAccessoryColor;
      } else if (kTorso.contains(fy, fx)) {
        color = kPalette[id.torso_color];
      } else if (kLegL.contains(fy, fx) || kLegR.contains(fy, fx)) {
        color = kPalette[id.leg_color];
      }
      for (int64_t c = 0; c < 3; ++c) {
        img[(c * h + y) * w + x] = color ? color[c] : kBackground;
      }
    }
  }
  if (noise_std > 0.0) {
    for (int64_t i = 0; i < img.size(); ++i) {
      img[i] += noise_rng.normal(0.0, noise_std);
    }
  }
  for (int64_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
  return img;
}

namespace {

void append_image(Tensor& dst, int64_t slot, const Tensor& img) {
  std::copy(img.data(), img.data() + img.size(), dst.data() + slot * img.size());
}

}  // namespace

Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<IdentityFactors> ids;
  ids.reserve(static_cast<size_t>(spec.num_ids));
  for (int i = 0; i < spec.num_ids; ++i) ids.push_back(sample_identity(rng));

  auto make_split = [&](int per_id) {
    LabeledImages set;
    const int64_t n = static_cast<int64_t>(per_id) * spec.num_ids;
    set.images = Tensor({n, 3, spec.canvas_h, spec.canvas_w});
    set.labels.reserve(static_cast<size_t>(n));
    int64_t slot = 0;
    for (int id = 0; id < spec.num_ids; ++id) {
      for (int j = 0; j < per_id; ++j) {
        const double tx = rng.uniform(-spec.translation_max, spec.translation_max);
        const double ty = rng.uniform(-spec.translation_max, spec.translation_max);
        const double scale = rng.uniform(spec.scale_min, spec.scale_max);
        append_image(set.images, slot++,
                     render_identity(ids[static_cast<size_t>(id)], spec, tx, ty, scale,
                                     spec.noise_std, rng));
        set.labels.push_back(id);
      }
    }
    return set;
  };

  Dataset ds;
  ds.train = make_split(spec.images_per_id);
  ds.query = make_split(spec.query_per_id);
  ds.gallery = make_split(spec.gallery_per_id);
  return ds;
}

void save_labeled_images(const std::filesystem::path& dir, const std::string& name,
                         const LabeledImages& set) {
  std::filesystem::create_directories(dir);
  save_iatn(dir / (name + ".iatn"), set.images);
  std::ofstream os(dir / (name + "_labels.tsv"), std::ios::trunc);
  if (!os) throw IoError("cannot write labels for " + name);
  for (size_t i = 0; i < set.labels.size(); ++i) {
    os << i << "\t" << set.labels[i] << "\n";
  }
}

LabeledImages load_labeled_images(const std::filesystem::path& dir, const std::string& name) {
  LabeledImages set;
  set.images = load_iatn(dir / (name + ".iatn"));
  std::ifstream is(dir / (name + "_labels.tsv"));
  if (!is) throw IoError("cannot open labels for " + name + " in " + dir.string());
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed label line: " + line);
    set.labels.push_back(static_cast<int>(std::stol(line.substr(tab + 1))));
  }
  if (static_cast<int64_t>(set.labels.size()) != set.images.extent(0)) {
    throw IoError("label count does not match image count for " + name);
  }
  return set;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  save_labeled_images(dir, "train", ds.train);
  save_labeled_images(dir, "query", ds.query);
  save_labeled_images(dir, "gallery", ds.gallery);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.train = load_labeled_images(dir, "train");
  ds.query = load_labeled_images(dir, "query");
  ds.gallery = load_labeled_images(dir, "gallery");
  return ds;
}

LabeledImages gather(const LabeledImages& set, std::span<const int64_t> indices) {
  LabeledImages out;
  Shape shape = set.images.shape();
  shape[0] = static_cast<int64_t>(indices.size());
  out.images = Tensor(shape);
  const int64_t per = set.images.size() / set.images.extent(0);
  for (size_t i = 0; i < indices.size(); ++i) {
    const int64_t src = indices[i];
    std::copy(set.images.data() + src * per, set.images.data() + (src + 1) * per,
              out.images.data() + static_cast<int64_t>(i) * per);
    out.labels.push_back(set.labels[static_cast<size_t>(src)]);
  }
  return out;
}

}  // namespace ia

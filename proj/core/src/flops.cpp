#include "ia/flops.hpp"

#include <sstream>

namespace ia {

namespace {

int64_t conv_multiplies(int64_t cout, int64_t cin, int64_t k, int64_t oh, int64_t ow) {
  return cout * cin * k * k * oh * ow;
}

void add_ia_layers(FlopReport& report, const IaCostSpec& ia, int stage, int64_t c, int64_t h,
                   int64_t w, const std::vector<int>& ks) {
  const std::string prefix = "ia.stage" + std::to_string(stage);
  if (ia.sia) {
    const int64_t n = sia_flops(c, h, w, ks);
    report.layers.push_back({prefix + ".sia", n});
    report.ia_multiplies += n;
  }
  if (ia.cia) {
    const int64_t n = cia_flops(c, h, w);
    report.layers.push_back({prefix + ".cia", n});
    report.ia_multiplies += n;
  }
}

}  // namespace

FlopReport flop_report_toy(const BackboneConfig& cfg) {
  cfg.validate();
  FlopReport report;
  const auto geom = cfg.stage_geometry();
  IaCostSpec ia;
  ia.stages = cfg.ia_placement;
  ia.sia = cfg.ia_modules != IAModules::kCiaOnly;
  ia.cia = cfg.ia_modules != IAModules::kSiaOnly;

  int64_t cin = cfg.in_channels;
  for (int s = 1; s <= 4; ++s) {
    const StageGeom& g = geom[static_cast<size_t>(s - 1)];
    const int64_t n = conv_multiplies(g.channels, cin, 3, g.h, g.w);
    report.layers.push_back({"stage" + std::to_string(s) + ".conv", n});
    report.backbone_multiplies += n;
    if (ia.stages.contains(s)) {
      add_ia_layers(report, ia, s, g.channels, g.h, g.w, cfg.ia.patch_sizes);
    }
    cin = g.channels;
  }
  if (cfg.num_ids > 0) {
    const int64_t n = cfg.num_ids * cfg.embed_dim();
    report.layers.push_back({"classifier", n});
    report.backbone_multiplies += n;
  }
  return report;
}

FlopReport flop_report_resnet50_256x128(const IaCostSpec& ia) {
  FlopReport report;
  auto conv = [&](const std::string& name, int64_t cout, int64_t cin, int64_t k, int64_t oh,
                  int64_t ow) {
    const int64_t n = conv_multiplies(cout, cin, k, oh, ow);
    report.layers.push_back({name, n});
    report.backbone_multiplies += n;
  };

  conv("conv1", 64, 3, 7, 128, 64);
  // maxpool to 64x32; no multiplies

  struct StageSpec {
    int blocks;
    int64_t mid, out;
    int64_t h, w;      // output resolution
    int64_t in;        // input channels to the first block
    int64_t in_h, in_w;  // resolution the first 1x1 runs at
  };
  // Last downsampling removed: stage 4 stays at 16x8.
  const StageSpec stages[4] = {
      {3, 64, 256, 64, 32, 64, 64, 32},
      {4, 128, 512, 32, 16, 256, 64, 32},
      {6, 256, 1024, 16, 8, 512, 32, 16},
      {3, 512, 2048, 16, 8, 1024, 16, 8},
  };
  for (int s = 0; s < 4; ++s) {
    const StageSpec& st = stages[s];
    const std::string prefix = "stage" + std::to_string(s + 1);
    for (int b = 0; b < st.blocks; ++b) {
      const std::string bp = prefix + ".block" + std::to_string(b + 1);
      const int64_t cin = b == 0 ? st.in : st.out;
      // Stride (when any) sits on the 3x3, so the first 1x1 of a transition
      // block still runs at the input resolution.
      const int64_t h1 = b == 0 ? st.in_h : st.h;
      const int64_t w1 = b == 0 ? st.in_w : st.w;
      conv(bp + ".conv1", st.mid, cin, 1, h1, w1);
      conv(bp + ".conv2", st.mid, st.mid, 3, st.h, st.w);
      conv(bp + ".conv3", st.out, st.mid, 1, st.h, st.w);
      if (b == 0) conv(bp + ".proj", st.out, cin, 1, st.h, st.w);
    }
    if (ia.stages.contains(s + 1)) {
      const std::vector<int> ks{1, 2, 3};
      add_ia_layers(report, ia, s + 1, st.out, st.h, st.w, ks);
    }
  }
  // Identity classifier at Market-1501 scale.
  const int64_t fc = 751 * 2048;
  report.layers.push_back({"classifier", fc});
  report.backbone_multiplies += fc;
  return report;
}

FlopReport flop_report(const std::string& preset, const BackboneConfig& toy_cfg,
                       const IaCostSpec& ia) {
  if (preset.empty() || preset == "toy") return flop_report_toy(toy_cfg);
  if (preset == "resnet50@256x128") return flop_report_resnet50_256x128(ia);
  throw ConfigError("unknown flops preset '" + preset + "' (expected toy or resnet50@256x128)");
}

std::string format_flop_report(const FlopReport& report) {
  std::ostringstream os;
  for (const LayerCount& layer : report.layers) {
    os << layer.name << "\t" << layer.multiplies << "\n";
  }
  os << "backbone_multiplies\t" << report.backbone_multiplies << "\n";
  os << "ia_multiplies\t" << report.ia_multiplies << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", 100.0 * report.relative_overhead());
  os << "relative_overhead_percent\t" << buf << "\n";
  return os.str();
}

}  // namespace ia

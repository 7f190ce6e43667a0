#include "ia/model.hpp"

#include <cmath>
#include <fstream>

#include "ia/strutil.hpp"
#include "ia/tensor_io.hpp"

namespace ia {

std::string to_string(IAModules m) {
  switch (m) {
    case IAModules::kBoth: return "both";
    case IAModules::kSiaOnly: return "sia";
    case IAModules::kCiaOnly: return "cia";
  }
  return "?";
}

IAModules ia_modules_from_string(const std::string& s) {
  if (s == "both") return IAModules::kBoth;
  if (s == "sia") return IAModules::kSiaOnly;
  if (s == "cia") return IAModules::kCiaOnly;
  throw ConfigError("unknown ia_modules '" + s + "' (expected both, sia or cia)");
}

void BackboneConfig::validate() const {
  ia.validate();
  for (int64_t wd : widths) {
    if (wd < 1) throw ConfigError("stage widths must be positive");
  }
  for (int stage : ia_placement) {
    if (stage < 1 || stage > 4) {
      throw ConfigError("ia_placement stages must be in {1,2,3,4}, got " + std::to_string(stage));
    }
  }
  stage_geometry();  // throws if any extent degenerates
}

std::vector<StageGeom> BackboneConfig::stage_geometry() const {
  std::vector<StageGeom> geom;
  int64_t h = in_h, w = in_w;
  for (int s = 1; s <= 4; ++s) {
    // Stage 1 is the stride-1 stem; stage 4 keeps its resolution when the
    // last downsampling is removed.
    const bool downsample = s >= 2 && (s < 4 || !remove_last_stride);
    if (downsample) {
      if (h % 2 != 0 || w % 2 != 0) {
        throw ConfigError("stage " + std::to_string(s) + " cannot halve odd extents " +
                          std::to_string(h) + "x" + std::to_string(w));
      }
      h /= 2;
      w /= 2;
    }
    if (h < 1 || w < 1) throw ConfigError("spatial extents collapsed below 1");
    geom.push_back({widths[static_cast<size_t>(s - 1)], h, w, downsample ? 2 : 1});
  }
  return geom;
}

IAConfig BackboneConfig::stage_ia_config(int stage) const {
  const auto geom = stage_geometry();
  const StageGeom& g = geom.at(static_cast<size_t>(stage - 1));
  IAConfig cfg = ia;
  if (sigma_auto) {
    cfg.sigma1 = static_cast<double>(g.w) * 10.0 / 8.0;
    cfg.sigma2 = static_cast<double>(g.h) * 20.0 / 16.0;
  }
  return cfg;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::trainable() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (size_t s = 0; s < stages.size(); ++s) {
    const std::string p = "stage" + std::to_string(s + 1);
    out.emplace_back(p + ".kernel", &stages[s].kernel);
    out.emplace_back(p + ".gamma", &stages[s].gamma);
    out.emplace_back(p + ".beta", &stages[s].beta);
  }
  for (auto& [stage, block] : ia) {
    const std::string p = "ia.stage" + std::to_string(stage);
    out.emplace_back(p + ".sia.gamma", &block.bn_sia.gamma);
    out.emplace_back(p + ".sia.beta", &block.bn_sia.beta);
    out.emplace_back(p + ".cia.gamma", &block.bn_cia.gamma);
    out.emplace_back(p + ".cia.beta", &block.bn_cia.beta);
  }
  out.emplace_back("cls.weight", &cls_weight);
  out.emplace_back("cls.bias", &cls_bias);
  return out;
}

ModelParams init_params(const BackboneConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  int64_t cin = cfg.in_channels;
  for (int s = 0; s < 4; ++s) {
    const int64_t cout = cfg.widths[static_cast<size_t>(s)];
    ConvBnParams conv(cout, cin);
    const double std = std::sqrt(2.0 / static_cast<double>(cin * 9));
    conv.kernel = rng.normal_tensor(conv.kernel.shape(), 0.0, std);
    p.stages.push_back(std::move(conv));
    cin = cout;
  }
  const int64_t ids = std::max<int64_t>(cfg.num_ids, 1);
  p.cls_weight = rng.normal_tensor({ids, cfg.embed_dim()}, 0.0, 0.01);
  p.cls_bias = Tensor::zeros({ids});
  // IA parameters draw nothing from the stream, so the backbone weights are
  // identical with and without IA blocks.
  for (int stage : cfg.ia_placement) {
    p.ia.emplace(stage, IABlockParams(cfg.widths[static_cast<size_t>(stage - 1)]));
  }
  return p;
}

ModelVars make_model_vars(ag::GradTape& tape, ModelParams& params, bool requires_grad) {
  ModelVars v;
  for (ConvBnParams& s : params.stages) {
    v.stages.push_back({tape.leaf(s.kernel, requires_grad), tape.leaf(s.gamma, requires_grad),
                        tape.leaf(s.beta, requires_grad), &s.state});
  }
  for (auto& [stage, block] : params.ia) {
    v.ia.emplace(stage, block_vars(tape, block, requires_grad));
  }
  v.cls_weight = tape.leaf(params.cls_weight, requires_grad);
  v.cls_bias = tape.leaf(params.cls_bias, requires_grad);
  return v;
}

ForwardOut model_forward(const ag::Var& images, const BackboneConfig& cfg, const ModelVars& vars,
                         ops::Mode mode) {
  const Shape& shape = images.value().shape();
  if (shape.size() != 4 || shape[1] != cfg.in_channels || shape[2] != cfg.in_h ||
      shape[3] != cfg.in_w) {
    throw DimensionError("model_forward: images " + shape_str(shape) + " do not match input " +
                         shape_str({-1, cfg.in_channels, cfg.in_h, cfg.in_w}));
  }
  const auto geom = cfg.stage_geometry();
  ag::Var x = images;
  for (int s = 1; s <= 4; ++s) {
    const ConvBnVars& cv = vars.stages[static_cast<size_t>(s - 1)];
    if (geom[static_cast<size_t>(s - 1)].stride == 2) x = ag::avg_pool2d(x);
    x = ag::conv2d(x, cv.kernel, 1, 1);
    x = ag::batchnorm2d(x, cv.gamma, cv.beta, mode, *cv.state);
    x = ag::relu(x);
    auto it = vars.ia.find(s);
    if (it != vars.ia.end()) {
      const IAConfig block_cfg = cfg.stage_ia_config(s);
      switch (cfg.ia_modules) {
        case IAModules::kBoth:
          x = ia_block(x, block_cfg, it->second, mode);
          break;
        case IAModules::kSiaOnly:
          x = ia_residual(x, InnerModule::kSia, block_cfg, it->second.sia, mode);
          break;
        case IAModules::kCiaOnly:
          x = ia_residual(x, InnerModule::kCia, block_cfg, it->second.cia, mode);
          break;
      }
    }
  }
  ForwardOut out;
  out.embeddings = ag::global_avg_pool(x);
  out.logits = ag::add_row_bias(ag::matmul(out.embeddings, vars.cls_weight, false, true),
                                vars.cls_bias);
  return out;
}

ag::Var model_loss(const ag::Var& logits, std::vector<int> labels) {
  return ag::cross_entropy(logits, std::move(labels));
}

Tensor embed(const Tensor& images, const BackboneConfig& cfg, ModelParams& params) {
  ag::GradTape tape(false);
  ModelVars vars = make_model_vars(tape, params, false);
  return model_forward(tape.leaf(images, false), cfg, vars, ops::Mode::kEval).embeddings.value();
}

Tensor stage_features(const Tensor& images, const BackboneConfig& cfg, ModelParams& params,
                      int stage) {
  if (stage < 1 || stage > 4) throw ConfigError("stage must be in {1,2,3,4}");
  ag::GradTape tape(false);
  ModelVars vars = make_model_vars(tape, params, false);
  const auto geom = cfg.stage_geometry();
  ag::Var x = tape.leaf(images, false);
  for (int s = 1; s <= stage; ++s) {
    const ConvBnVars& cv = vars.stages[static_cast<size_t>(s - 1)];
    if (geom[static_cast<size_t>(s - 1)].stride == 2) x = ag::avg_pool2d(x);
    x = ag::conv2d(x, cv.kernel, 1, 1);
    x = ag::batchnorm2d(x, cv.gamma, cv.beta, ops::Mode::kEval, *cv.state);
    x = ag::relu(x);
    if (s == stage) break;
    auto it = vars.ia.find(s);
    if (it != vars.ia.end()) {
      x = ia_block(x, cfg.stage_ia_config(s), it->second, ops::Mode::kEval);
    }
  }
  return x.value();
}

std::pair<Tensor, Tensor> forward_eval(const Tensor& images, const BackboneConfig& cfg,
                                       ModelParams& params) {
  ag::GradTape tape(false);
  ModelVars vars = make_model_vars(tape, params, false);
  ForwardOut out = model_forward(tape.leaf(images, false), cfg, vars, ops::Mode::kEval);
  return {out.embeddings.value(), out.logits.value()};
}

// --- checkpoints -------------------------------------------------------------

namespace {

std::string widths_str(const std::array<int64_t, 4>& w) {
  return std::to_string(w[0]) + "," + std::to_string(w[1]) + "," + std::to_string(w[2]) + "," +
         std::to_string(w[3]);
}

std::string placement_str(const std::set<int>& placement) {
  if (placement.empty()) return "none";
  std::vector<std::string> parts;
  for (int s : placement) parts.push_back("stage" + std::to_string(s));
  return strutil::join(parts, ",");
}

std::set<int> placement_from_str(const std::string& s) {
  std::set<int> out;
  if (strutil::trim(s) == "none" || strutil::trim(s).empty()) return out;
  for (const std::string& part : strutil::split(s, ',')) {
    const std::string t = strutil::trim(part);
    if (t.rfind("stage", 0) != 0) {
      throw ConfigError("ia_placement entries look like stageN, got '" + t + "'");
    }
    out.insert(static_cast<int>(strutil::parse_int(t.substr(5), "ia_placement")));
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const BackboneConfig& cfg,
                     ModelParams& params) {
  TensorManifest m;
  for (auto& [name, tensor] : params.trainable()) m.add(name, *tensor);
  for (size_t s = 0; s < params.stages.size(); ++s) {
    const std::string p = "stage" + std::to_string(s + 1);
    m.add(p + ".running_mean", params.stages[s].state.running_mean);
    m.add(p + ".running_var", params.stages[s].state.running_var);
  }
  for (auto& [stage, block] : params.ia) {
    const std::string p = "ia.stage" + std::to_string(stage);
    m.add(p + ".sia.running_mean", block.bn_sia.state.running_mean);
    m.add(p + ".sia.running_var", block.bn_sia.state.running_var);
    m.add(p + ".cia.running_mean", block.bn_cia.state.running_mean);
    m.add(p + ".cia.running_var", block.bn_cia.state.running_var);
  }
  save_manifest_dir(dir, m);

  std::ofstream os(dir / "model.cfg", std::ios::trunc);
  if (!os) throw IoError("cannot write model config in " + dir.string());
  os << "widths = " << widths_str(cfg.widths) << "\n";
  os << "ia_placement = " << placement_str(cfg.ia_placement) << "\n";
  os << "ia_modules = " << to_string(cfg.ia_modules) << "\n";
  os << "remove_last_stride = " << (cfg.remove_last_stride ? "true" : "false") << "\n";
  os << "patch_sizes = " << strutil::int_list_str(cfg.ia.patch_sizes) << "\n";
  os << "fusion = " << relation::to_string(cfg.ia.fusion) << "\n";
  os << "sigma1 = " << cfg.ia.sigma1 << "\n";
  os << "sigma2 = " << cfg.ia.sigma2 << "\n";
  os << "sigma_auto = " << (cfg.sigma_auto ? "true" : "false") << "\n";
  os << "use_location = " << (cfg.ia.use_location ? "true" : "false") << "\n";
  os << "use_appearance = " << (cfg.ia.use_appearance ? "true" : "false") << "\n";
  os << "arrangement = " << to_string(cfg.ia.arrangement) << "\n";
  os << "num_ids = " << cfg.num_ids << "\n";
}

std::pair<BackboneConfig, ModelParams> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream is(dir / "model.cfg");
  if (!is) throw ConfigError("missing checkpoint config " + (dir / "model.cfg").string());
  BackboneConfig cfg;
  std::string line;
  while (std::getline(is, line)) {
    const std::string t = strutil::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed checkpoint config line: " + line);
    const std::string key = strutil::trim(t.substr(0, eq));
    const std::string value = strutil::trim(t.substr(eq + 1));
    if (key == "widths") {
      const auto v = strutil::parse_int_list(value, key);
      if (v.size() != 4) throw ConfigError("widths needs 4 entries");
      for (size_t i = 0; i < 4; ++i) cfg.widths[i] = v[i];
    } else if (key == "ia_placement") {
      cfg.ia_placement = placement_from_str(value);
    } else if (key == "ia_modules") {
      cfg.ia_modules = ia_modules_from_string(value);
    } else if (key == "remove_last_stride") {
      cfg.remove_last_stride = strutil::parse_bool(value, key);
    } else if (key == "patch_sizes") {
      cfg.ia.patch_sizes = strutil::parse_int_list(value, key);
    } else if (key == "fusion") {
      cfg.ia.fusion = relation::fusion_from_string(value);
    } else if (key == "sigma1") {
      cfg.ia.sigma1 = strutil::parse_double(value, key);
    } else if (key == "sigma2") {
      cfg.ia.sigma2 = strutil::parse_double(value, key);
    } else if (key == "sigma_auto") {
      cfg.sigma_auto = strutil::parse_bool(value, key);
    } else if (key == "use_location") {
      cfg.ia.use_location = strutil::parse_bool(value, key);
    } else if (key == "use_appearance") {
      cfg.ia.use_appearance = strutil::parse_bool(value, key);
    } else if (key == "arrangement") {
      cfg.ia.arrangement = arrangement_from_string(value);
    } else if (key == "num_ids") {
      cfg.num_ids = strutil::parse_int(value, key);
    } else {
      throw ConfigError("unknown checkpoint config key '" + key + "'");
    }
  }
  cfg.validate();

  const TensorManifest m = load_manifest_dir(dir);
  ModelParams params = init_params(cfg, 0);
  for (auto& [name, tensor] : params.trainable()) {
    const Tensor& loaded = m.get(name);
    if (!loaded.same_shape(*tensor)) {
      throw IoError("checkpoint tensor " + name + " has shape " + shape_str(loaded.shape()) +
                    ", expected " + shape_str(tensor->shape()));
    }
    *tensor = loaded;
  }
  for (size_t s = 0; s < params.stages.size(); ++s) {
    const std::string p = "stage" + std::to_string(s + 1);
    params.stages[s].state.running_mean = m.get(p + ".running_mean");
    params.stages[s].state.running_var = m.get(p + ".running_var");
  }
  for (auto& [stage, block] : params.ia) {
    const std::string p = "ia.stage" + std::to_string(stage);
    block.bn_sia.state.running_mean = m.get(p + ".sia.running_mean");
    block.bn_sia.state.running_var = m.get(p + ".sia.running_var");
    block.bn_cia.state.running_mean = m.get(p + ".cia.running_mean");
    block.bn_cia.state.running_var = m.get(p + ".cia.running_var");
  }
  return {cfg, std::move(params)};
}

}  // namespace ia

#include "ia/ablate.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>

#include "ia/experiment.hpp"

namespace ia {

namespace {

BackboneConfig baseline(const BackboneConfig& base) {
  BackboneConfig cfg = base;
  cfg.ia_placement.clear();
  return cfg;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<std::pair<std::string, BackboneConfig>> ablation_grid(const std::string& axis,
                                                                  const BackboneConfig& base) {
  std::vector<std::pair<std::string, BackboneConfig>> grid;
  if (axis == "none") {
    grid.emplace_back("config", base);
    return grid;
  }
  grid.emplace_back("base", baseline(base));
  if (axis == "context") {
    for (int k : {1, 2, 3, 5}) {
      BackboneConfig cfg = base;
      cfg.ia_modules = IAModules::kSiaOnly;
      cfg.ia.use_location = false;
      cfg.ia.use_appearance = true;
      cfg.ia.patch_sizes = {k};
      grid.emplace_back("K=" + std::to_string(k), cfg);
    }
  } else if (axis == "fusion") {
    for (auto f : {relation::Fusion::kMax, relation::Fusion::kSum, relation::Fusion::kProd}) {
      BackboneConfig cfg = base;
      cfg.ia_modules = IAModules::kSiaOnly;
      cfg.ia.use_location = false;
      cfg.ia.use_appearance = true;
      cfg.ia.patch_sizes = {1, 2, 3};
      cfg.ia.fusion = f;
      grid.emplace_back("fusion=" + relation::to_string(f), cfg);
    }
  } else if (axis == "variant") {
    for (const char* variant : {"location", "appearance", "semantic"}) {
      BackboneConfig cfg = base;
      cfg.ia_modules = IAModules::kSiaOnly;
      cfg.ia.use_location = std::string(variant) != "appearance";
      cfg.ia.use_appearance = std::string(variant) != "location";
      grid.emplace_back(std::string("variant=") + variant, cfg);
    }
  } else if (axis == "arrangement") {
    {
      BackboneConfig cfg = base;
      cfg.ia_modules = IAModules::kCiaOnly;
      grid.emplace_back("cia_only", cfg);
    }
    for (auto a :
         {Arrangement::kParallel, Arrangement::kCiaThenSia, Arrangement::kSiaThenCia}) {
      BackboneConfig cfg = base;
      cfg.ia_modules = IAModules::kBoth;
      cfg.ia.arrangement = a;
      grid.emplace_back("arrangement=" + to_string(a), cfg);
    }
  } else if (axis == "placement") {
    for (const auto& [id, stages] :
         std::vector<std::pair<std::string, std::set<int>>>{{"stage1", {1}},
                                                            {"stage2", {2}},
                                                            {"stage3", {3}},
                                                            {"stage4", {4}},
                                                            {"stage23", {2, 3}}}) {
      BackboneConfig cfg = base;
      cfg.ia_placement = stages;
      grid.emplace_back("placement=" + id, cfg);
    }
  } else {
    throw ConfigError("unknown ablation axis '" + axis +
                      "' (expected none, context, fusion, variant, arrangement or placement)");
  }
  return grid;
}

AblateResult ablate(const AblateSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("ablate needs at least one seed");
  const auto grid = ablation_grid(spec.axis, spec.model);

  AblateResult result;
  std::map<std::string, std::vector<double>> top1_by_id;
  std::map<std::string, std::vector<double>> map_by_id;

  for (uint64_t seed : spec.seeds) {
    SyntheticSpec data_spec = spec.data;
    data_spec.seed = seed;
    const Dataset data = generate(data_spec);
    for (const auto& [id, cfg_base] : grid) {
      BackboneConfig cfg = cfg_base;
      cfg.num_ids = data_spec.num_ids;
      TrainHyper hyper = spec.hyper;
      hyper.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const ExperimentResult r = run_experiment(cfg, data, hyper);
      const double seconds = std::chrono::duration<double>(
          std::chrono::steady_clock::now() - t0).count();
      AblateRow row;
      row.config_id = spec.seeds.size() == 1 ? id : id + "@seed" + std::to_string(seed);
      row.top1 = r.retrieval.top_k(1);
      row.map = r.retrieval.map;
      row.loss_final = r.train.loss_curve.empty() ? 0.0 : r.train.loss_curve.back();
      row.seconds = seconds;
      row.loss_curve = r.train.loss_curve;
      result.rows.push_back(row);
      top1_by_id[id].push_back(row.top1);
      map_by_id[id].push_back(row.map);
    }
  }

  std::map<std::string, double> med_top1;
  for (const auto& [id, xs] : top1_by_id) med_top1[id] = median(xs);
  if (spec.seeds.size() > 1) {
    for (const auto& [id, cfg] : grid) {
      AblateRow row;
      row.config_id = id + "@median";
      row.top1 = med_top1[id];
      row.map = median(map_by_id[id]);
      result.rows.push_back(row);
    }
  }

  // Qualitative directions, reported but never asserted.
  if (spec.axis != "none") {
    double best_ia = 0.0;
    for (const auto& [id, xs] : top1_by_id) {
      if (id != "base") best_ia = std::max(best_ia, med_top1[id]);
    }
    std::ostringstream os;
    os << "direction ia>=baseline (median top-1): " << (best_ia >= med_top1["base"] ? "pass" : "fail")
       << " (ia=" << best_ia << " base=" << med_top1["base"] << ")";
    result.notes.push_back(os.str());
  }
  if (spec.axis == "variant") {
    const double l = med_top1["variant=location"], a = med_top1["variant=appearance"],
                 s = med_top1["variant=semantic"];
    std::ostringstream os;
    os << "ordering semantic>=appearance>=location (median top-1): "
       << (s >= a && a >= l ? "pass" : "fail") << " (s=" << s << " a=" << a << " l=" << l << ")";
    result.notes.push_back(os.str());
  }
  return result;
}

std::string ablation_table_tsv(const AblateResult& result) {
  std::ostringstream os;
  os << "config_id\ttop1\tmap\tloss_final\tseconds\n";
  for (const AblateRow& row : result.rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f\t%.3f\n", row.config_id.c_str(),
                  row.top1, row.map, row.loss_final, row.seconds);
    os << buf;
  }
  for (const std::string& note : result.notes) os << "# " << note << "\n";
  return os.str();
}

}  // namespace ia

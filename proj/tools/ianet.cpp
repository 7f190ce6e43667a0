// ianet: train, evaluate and inspect interaction-and-aggregation models on
// the synthetic re-identification task.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

#include "ia/ablate.hpp"
#include "ia/autograd.hpp"
#include "ia/config.hpp"
#include "ia/dataset.hpp"
#include "ia/experiment.hpp"
#include "ia/flops.hpp"
#include "ia/gradcheck_suite.hpp"
#include "ia/ia_block.hpp"
#include "ia/model.hpp"
#include "ia/pgm.hpp"
#include "ia/strutil.hpp"
#include "ia/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace ia;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (key = value lines)");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--set", args.overrides, "override a config key (key=value, repeatable)");
  cmd->add_option("--seed", args.seed, "override the seed");
}

ExperimentConfig load_experiment(const CommonArgs& args) {
  KvConfig kv;
  if (!args.config_path.empty()) kv = parse_kv_file(args.config_path);
  for (const std::string& assignment : args.overrides) apply_override(kv, assignment);
  if (args.seed) kv.set("seed", std::to_string(*args.seed));
  return experiment_from_kv(kv);
}

fs::path ensure_out(const CommonArgs& args) {
  fs::path dir(args.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << text;
}

std::string loss_curve_tsv(const std::vector<double>& curve) {
  std::string out = "epoch\tloss\n";
  char buf[64];
  for (size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.12g\n", i, curve[i]);
    out += buf;
  }
  return out;
}

std::string retrieval_tsv(const RetrievalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "top1\t%.6f\ntop5\t%.6f\ntop10\t%.6f\nmap\t%.6f\n",
                report.top_k(1), report.top_k(std::min<size_t>(5, report.cmc.size())),
                report.top_k(std::min<size_t>(10, report.cmc.size())), report.map);
  return buf;
}

void write_retrieval(const fs::path& dir, const RetrievalReport& report) {
  write_text(dir / "retrieval.tsv", retrieval_tsv(report));
  std::string cmc = "k\tcmc\n";
  char buf[64];
  for (size_t k = 0; k < report.cmc.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\n", k + 1, report.cmc[k]);
    cmc += buf;
  }
  write_text(dir / "cmc.tsv", cmc);
  std::string ap = "query\tap\n";
  for (size_t q = 0; q < report.per_query_ap.size(); ++q) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\n", q, report.per_query_ap[q]);
    ap += buf;
  }
  write_text(dir / "per_query_ap.tsv", ap);
}

int run_gen_data(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  const fs::path out = ensure_out(args);
  const Dataset ds = generate(cfg.data);
  save_dataset(out, ds);
  std::cout << "wrote dataset (" << ds.train.count() << " train, " << ds.query.count()
            << " query, " << ds.gallery.count() << " gallery) to " << out.string() << "\n";
  return 0;
}

int run_train(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  const fs::path out = ensure_out(args);
  const Dataset ds = generate(cfg.data);
  BackboneConfig model_cfg = cfg.model;
  model_cfg.num_ids = cfg.data.num_ids;

  TrainResult result = train(model_cfg, ds.train, cfg.hyper);
  write_text(out / "loss_curve.tsv", loss_curve_tsv(result.loss_curve));
  save_checkpoint(out / "checkpoint", model_cfg, result.params);

  // Final metrics come from the saved checkpoint so a later `eval` on the
  // same directory reproduces them bit for bit.
  auto [loaded_cfg, loaded_params] = load_checkpoint(out / "checkpoint");
  const RetrievalReport report =
      evaluate_retrieval(loaded_cfg, loaded_params, ds.query, ds.gallery);
  write_retrieval(out, report);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "final_loss\t%.12g\ntop1\t%.6f\nmap\t%.6f\n",
                result.loss_curve.empty() ? 0.0 : result.loss_curve.back(), report.top_k(1),
                report.map);
  write_text(out / "train_summary.tsv", buf);
  std::cout << "trained " << cfg.hyper.epochs << " epochs; final loss "
            << (result.loss_curve.empty() ? 0.0 : result.loss_curve.back()) << ", top-1 "
            << report.top_k(1) << ", mAP " << report.map << "\n";
  return 0;
}

int run_eval(const CommonArgs& args, const std::string& checkpoint) {
  const ExperimentConfig cfg = load_experiment(args);
  const fs::path out = ensure_out(args);
  if (!fs::exists(fs::path(checkpoint) / "model.cfg")) {
    throw ConfigError("checkpoint not found: " + checkpoint);
  }
  auto [model_cfg, params] = load_checkpoint(checkpoint);
  const Dataset ds = generate(cfg.data);
  const RetrievalReport report = evaluate_retrieval(model_cfg, params, ds.query, ds.gallery);
  write_retrieval(out, report);
  std::cout << retrieval_tsv(report);
  return 0;
}

int run_ablate(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  const fs::path out = ensure_out(args);
  const AblateResult result = ablate(ablate_spec_from(cfg));
  write_text(out / "ablation.tsv", ablation_table_tsv(result));
  fs::create_directories(out / "curves");
  for (const AblateRow& row : result.rows) {
    if (row.loss_curve.empty()) continue;
    std::string name = row.config_id;
    for (char& c : name) {
      if (c == '/' || c == '=' || c == '@') c = '_';
    }
    write_text(out / "curves" / (name + ".tsv"), loss_curve_tsv(row.loss_curve));
  }
  std::cout << ablation_table_tsv(result);
  return 0;
}

int run_gradcheck(const CommonArgs& args, const std::string& perturb) {
  uint64_t seed = args.seed.value_or(99);
  if (!perturb.empty()) ag::set_backward_perturbation(perturb);
  const GradcheckOutcome outcome = run_gradcheck_suite(seed);
  ag::clear_backward_perturbation();
  std::cout << outcome.report;
  if (!outcome.ok) {
    std::cout << "gradient check FAILED at op: " << outcome.first_fail;
    if (!perturb.empty()) std::cout << " (with injected perturbation on '" << perturb << "')";
    std::cout << "\n";
    return 1;
  }
  std::cout << "gradient check passed\n";
  return 0;
}

int run_flops(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  BackboneConfig model_cfg = cfg.model;
  model_cfg.num_ids = cfg.data.num_ids;
  const FlopReport report = flop_report(cfg.flops_preset, model_cfg, cfg.flops_ia);
  const std::string text = format_flop_report(report);
  std::cout << text;
  if (args.out_dir != ".") write_text(ensure_out(args) / "flops.tsv", text);
  return 0;
}

struct DumpArgs {
  std::string checkpoint;
  std::string image_path;
  int64_t index = 0;
  int stage = 3;
  std::string pos = "0,0";
  std::string channels = "0";
  double top_p = 0.0;
  bool verify = false;
};

int run_dump_relation(const CommonArgs& args, const DumpArgs& dump) {
  const ExperimentConfig cfg = load_experiment(args);
  const fs::path out = ensure_out(args);
  if (!fs::exists(fs::path(dump.checkpoint) / "model.cfg")) {
    throw ConfigError("checkpoint not found: " + dump.checkpoint);
  }
  auto [model_cfg, params] = load_checkpoint(dump.checkpoint);

  Tensor image;
  if (!dump.image_path.empty()) {
    image = load_iatn(dump.image_path);
    if (image.rank() == 3) image = image.reshaped({1, image.extent(0), image.extent(1),
                                                   image.extent(2)});
    if (image.rank() != 4 || image.extent(0) != 1) {
      throw ConfigError("--image expects one [3,H,W] tensor");
    }
  } else {
    const Dataset ds = generate(cfg.data);
    if (dump.index < 0 || dump.index >= ds.train.count()) {
      throw ConfigError("--index outside the train split");
    }
    const int64_t idx[1] = {dump.index};
    image = gather(ds.train, idx).images;
  }

  const Tensor feats = stage_features(image, model_cfg, params, dump.stage);
  const int64_t c = feats.extent(1);
  const relation::Grid grid{feats.extent(2), feats.extent(3)};
  const Tensor fmat = feats.reshaped({c, grid.m()});

  const auto pos_parts = strutil::split(dump.pos, ',');
  if (pos_parts.size() != 2) throw ConfigError("--pos expects y,x");
  const int64_t py = strutil::parse_int(pos_parts[0], "--pos");
  const int64_t px = strutil::parse_int(pos_parts[1], "--pos");
  if (py < 0 || py >= grid.h || px < 0 || px >= grid.w) {
    throw ConfigError("query position " + dump.pos + " outside the stage grid " +
                      std::to_string(grid.h) + "x" + std::to_string(grid.w));
  }
  const int64_t qpos = py * grid.w + px;

  const IAConfig block_cfg = model_cfg.stage_ia_config(dump.stage);
  relation::RelationConfig rcfg = block_cfg.relation_config(grid);

  auto dump_row = [&](const std::string& name, const Tensor& matrix) {
    Tensor row({grid.h, grid.w});
    for (int64_t j = 0; j < grid.m(); ++j) row[j] = matrix[qpos * grid.m() + j];
    save_pgm_normalized(out / (name + ".pgm"), row);
    save_iatn(out / (name + ".iatn"), row);
    save_grid_sidecar(out / (name + ".grid"), grid.h, grid.w);
    if (dump.top_p > 0.0) {
      // Keep the smallest set of positions whose mass reaches top_p.
      std::vector<int64_t> order(static_cast<size_t>(grid.m()));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(),
                [&row](int64_t a, int64_t b) { return row[a] > row[b]; });
      std::vector<uint8_t> mask(static_cast<size_t>(grid.m()), 0);
      double mass = 0.0;
      for (int64_t j : order) {
        if (mass >= dump.top_p) break;
        mask[static_cast<size_t>(j)] = 255;
        mass += row[j];
      }
      save_pgm(out / (name + "_top_p.pgm"), grid.h, grid.w, mask);
    }
  };

  // Semantic (or the configured variant), appearance-only and location-only.
  dump_row("relation_semantic", relation::relation_map(fmat, rcfg).matrix);
  if (rcfg.use_appearance) {
    relation::RelationConfig app = rcfg;
    app.use_location = false;
    dump_row("relation_appearance", relation::relation_map(fmat, app).matrix);
  }
  if (rcfg.use_location) {
    dump_row("relation_location",
             relation::location_map({rcfg.sigma1, rcfg.sigma2, grid}).matrix);
  }

  // CIA-aggregated channel maps.
  const Tensor aggregated = cia_forward(feats);
  for (int ch : strutil::parse_int_list(dump.channels, "--channels")) {
    if (ch < 0 || ch >= c) throw ConfigError("--channels entry outside [0," + std::to_string(c) + ")");
    Tensor map({grid.h, grid.w});
    for (int64_t j = 0; j < grid.m(); ++j) map[j] = std::max(0.0, aggregated[ch * grid.m() + j]);
    save_pgm_normalized(out / ("cia_channel_" + std::to_string(ch) + ".pgm"), map);
  }

  if (dump.verify) {
    const Tensor raw = load_iatn(out / "relation_semantic.iatn");
    double sum = 0.0;
    for (int64_t j = 0; j < raw.size(); ++j) sum += raw[j];
    if (std::abs(sum - 1.0) > 1e-6) {
      throw NumericError("verify: relation row sums to " + std::to_string(sum));
    }
    std::cout << "verify: relation row sum = " << sum << " (ok)\n";
  }
  std::cout << "wrote relation dumps to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interaction-and-aggregation attention: training, retrieval and inspection"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, ablate_args, grad_args, flops_args, dump_args_c;
  std::string eval_checkpoint;
  std::string perturb_op;
  DumpArgs dump;

  add_common(app.add_subcommand("gen-data", "generate a synthetic dataset"), gen_args);
  add_common(app.add_subcommand("train", "train a model on synthetic data"), train_args);
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required();
  add_common(app.add_subcommand("ablate", "run an ablation grid"), ablate_args);
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "run the gradient-check suite");
  add_common(grad_cmd, grad_args);
  grad_cmd->add_option("--perturb-grad", perturb_op, "inject a backward bug into the named op");
  add_common(app.add_subcommand("flops", "report multiply counts"), flops_args);
  CLI::App* dump_cmd = app.add_subcommand("dump-relation", "dump relation-map heatmaps");
  add_common(dump_cmd, dump_args_c);
  dump_cmd->add_option("--checkpoint", dump.checkpoint, "checkpoint directory")->required();
  dump_cmd->add_option("--image", dump.image_path, "IATN image tensor [3,H,W]");
  dump_cmd->add_option("--index", dump.index, "train-split image index (when no --image)");
  dump_cmd->add_option("--stage", dump.stage, "backbone stage (1..4)")->check(CLI::Range(1, 4));
  dump_cmd->add_option("--pos", dump.pos, "query position y,x on the stage grid");
  dump_cmd->add_option("--channels", dump.channels, "CIA channels to dump (comma list)");
  dump_cmd->add_option("--top-p", dump.top_p, "also write a mass-threshold mask");
  dump_cmd->add_flag("--verify", dump.verify, "re-read the sidecar and check the row sum");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-data")) return run_gen_data(gen_args);
    if (app.got_subcommand("train")) return run_train(train_args);
    if (app.got_subcommand("eval")) return run_eval(eval_args, eval_checkpoint);
    if (app.got_subcommand("ablate")) return run_ablate(ablate_args);
    if (app.got_subcommand("gradcheck")) return run_gradcheck(grad_args, perturb_op);
    if (app.got_subcommand("flops")) return run_flops(flops_args);
    if (app.got_subcommand("dump-relation")) return run_dump_relation(dump_args_c, dump);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <doctest.h>

#include "ia/ablate.hpp"
#include "ia/experiment.hpp"
#include "ia/flops.hpp"
#include "ia/train.hpp"

using namespace ia;

namespace {

SyntheticSpec tiny_data(uint64_t seed) {
  SyntheticSpec spec;
  spec.num_ids = 2;
  spec.images_per_id = 4;
  spec.query_per_id = 1;
  spec.gallery_per_id = 2;
  spec.translation_max = 0.0;
  spec.scale_min = spec.scale_max = 1.0;
  spec.noise_std = 0.0;
  spec.seed = seed;
  return spec;
}

BackboneConfig tiny_model(int num_ids) {
  BackboneConfig cfg;
  cfg.widths = {4, 4, 6, 8};
  cfg.ia_placement = {3};
  cfg.num_ids = num_ids;
  return cfg;
}

}  // namespace

TEST_CASE("lr = 0 leaves parameters untouched and the loss curve flat") {
  const Dataset data = generate(tiny_data(1));
  BackboneConfig cfg = tiny_model(2);
  TrainHyper hyper;
  hyper.lr = 0.0;
  hyper.epochs = 3;
  hyper.batch = 4;
  hyper.seed = 5;
  const TrainResult result = train(cfg, data.train, hyper);

  const ModelParams fresh = init_params(cfg, hyper.seed);
  ModelParams trained = result.params;
  auto a = trained.trainable();
  ModelParams fresh_copy = fresh;
  auto b = fresh_copy.trainable();
  for (size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);

  REQUIRE(result.loss_curve.size() == 3);
  CHECK(result.loss_curve[1] == result.loss_curve[0]);
  CHECK(result.loss_curve[2] == result.loss_curve[0]);
}

TEST_CASE("separable two-identity task trains to a small loss") {
  const Dataset data = generate(tiny_data(2));
  BackboneConfig cfg = tiny_model(2);
  TrainHyper hyper;
  hyper.lr = 0.01;  // small model, nuisance off; larger step is stable
  hyper.epochs = 20;
  hyper.batch = 4;
  hyper.seed = 7;
  const TrainResult result = train(cfg, data.train, hyper);
  CHECK(result.loss_curve.back() < 0.1);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  const Dataset data = generate(tiny_data(3));
  BackboneConfig cfg = tiny_model(2);
  TrainHyper hyper;
  hyper.epochs = 2;
  hyper.batch = 4;
  hyper.seed = 11;
  TrainResult r1 = train(cfg, data.train, hyper);
  TrainResult r2 = train(cfg, data.train, hyper);
  CHECK(r1.loss_curve == r2.loss_curve);
  auto a = r1.params.trainable();
  auto b = r2.params.trainable();
  for (size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
}

TEST_CASE("training errors: empty data, bad labels") {
  BackboneConfig cfg = tiny_model(2);
  TrainHyper hyper;
  LabeledImages empty;
  empty.images = Tensor({1, 3, 64, 32});
  CHECK_THROWS_AS(train(cfg, empty, hyper), ConfigError);

  Dataset data = generate(tiny_data(4));
  data.train.labels[0] = 9;  // out of range for num_ids = 2
  CHECK_THROWS_AS(train(cfg, data.train, hyper), IndexError);
}

TEST_CASE("toy flop report equals the hand-summed per-layer count") {
  BackboneConfig cfg;  // widths 16,32,64,128; IA at stages 2+3
  cfg.num_ids = 20;
  const FlopReport report = flop_report_toy(cfg);

  // stage1 @64x32, stage2 @32x16, stage3 @16x8, stage4 @16x8 (stride removed)
  const int64_t conv1 = 16 * 3 * 9 * 64 * 32;
  const int64_t conv2 = 32 * 16 * 9 * 32 * 16;
  const int64_t conv3 = 64 * 32 * 9 * 16 * 8;
  const int64_t conv4 = 128 * 64 * 9 * 16 * 8;
  const int64_t cls = 20 * 128;
  CHECK(report.backbone_multiplies == conv1 + conv2 + conv3 + conv4 + cls);

  const int64_t sia2 = 2 * 32 * 512 * 512;
  const int64_t cia2 = 2 * 512 * 32 * 32;
  const int64_t sia3 = 2 * 64 * 128 * 128;
  const int64_t cia3 = 2 * 128 * 64 * 64;
  CHECK(report.ia_multiplies == sia2 + cia2 + sia3 + cia3);

  int64_t layer_total = 0;
  for (const auto& layer : report.layers) layer_total += layer.multiplies;
  CHECK(layer_total == report.total());

  // Reproducible.
  CHECK(flop_report_toy(cfg).total() == report.total());
}

TEST_CASE("empty placement means zero overhead") {
  BackboneConfig cfg;
  cfg.ia_placement.clear();
  cfg.num_ids = 10;
  const FlopReport report = flop_report_toy(cfg);
  CHECK(report.ia_multiplies == 0);
  CHECK(report.relative_overhead() == 0.0);
}

TEST_CASE("resnet50 preset brackets the reported overhead") {
  IaCostSpec ia;
  ia.stages = {3};
  ia.sia = true;
  ia.cia = false;
  const FlopReport report = flop_report_resnet50_256x128(ia);
  CHECK(report.ia_multiplies == 33554432);  // 2 * 1024 * 128^2
  // Baseline lands near the reported ~4.06 GMacs.
  CHECK(report.backbone_multiplies > 3900000000LL);
  CHECK(report.backbone_multiplies < 4200000000LL);
  const double overhead = report.relative_overhead();
  CHECK(overhead > 0.005);
  CHECK(overhead < 0.010);
}

TEST_CASE("multi-K and single-K attention cost identically") {
  BackboneConfig multi;
  multi.num_ids = 5;
  multi.ia.patch_sizes = {1, 2, 3};
  BackboneConfig single = multi;
  single.ia.patch_sizes = {1};
  CHECK(flop_report_toy(multi).ia_multiplies == flop_report_toy(single).ia_multiplies);
}

TEST_CASE("ablation with a single-entry grid matches the direct pipeline") {
  AblateSpec spec;
  spec.axis = "none";
  spec.data = tiny_data(21);
  spec.model = tiny_model(2);
  spec.hyper.epochs = 2;
  spec.hyper.batch = 4;
  spec.seeds = {21};

  const AblateResult result = ablate(spec);
  REQUIRE(result.rows.size() == 1);

  SyntheticSpec data_spec = spec.data;
  data_spec.seed = 21;
  const Dataset data = generate(data_spec);
  BackboneConfig cfg = spec.model;
  cfg.num_ids = data_spec.num_ids;
  TrainHyper hyper = spec.hyper;
  hyper.seed = 21;
  const ExperimentResult direct = run_experiment(cfg, data, hyper);
  CHECK(result.rows[0].top1 == direct.retrieval.top_k(1));
  CHECK(result.rows[0].map == direct.retrieval.map);
  CHECK(result.rows[0].loss_final == direct.train.loss_curve.back());
}

TEST_CASE("fusion grid yields one row per fusion plus the baseline") {
  AblateSpec spec;
  spec.axis = "fusion";
  spec.data = tiny_data(22);
  spec.model = tiny_model(2);
  spec.hyper.epochs = 1;
  spec.hyper.batch = 4;
  spec.seeds = {22};
  const AblateResult result = ablate(spec);
  REQUIRE(result.rows.size() == 4);
  CHECK(result.rows[0].config_id == "base");
  CHECK(result.rows[1].config_id == "fusion=max");
  CHECK(result.rows[2].config_id == "fusion=sum");
  CHECK(result.rows[3].config_id == "fusion=prod");
  const std::string tsv = ablation_table_tsv(result);
  CHECK(tsv.find("config_id\ttop1\tmap\tloss_final\tseconds") == 0);
}

TEST_CASE("ablation grids cover the studied axes") {
  BackboneConfig base = tiny_model(2);
  CHECK(ablation_grid("context", base).size() == 5);
  CHECK(ablation_grid("variant", base).size() == 4);
  CHECK(ablation_grid("arrangement", base).size() == 5);
  CHECK(ablation_grid("placement", base).size() == 6);
  CHECK_THROWS_AS(ablation_grid("nope", base), ConfigError);
}

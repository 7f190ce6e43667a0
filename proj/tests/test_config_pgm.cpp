#include <doctest.h>

#include <filesystem>

#include "ia/config.hpp"
#include "ia/pgm.hpp"

using namespace ia;

TEST_CASE("kv parsing: comments, whitespace, later keys win") {
  const KvConfig kv = parse_kv_text(
      "# comment\n"
      "lr = 0.001\n"
      "\n"
      "epochs = 4  # trailing comment\n"
      "lr = 0.002\n",
      "inline");
  CHECK(*kv.find("lr") == "0.002");
  CHECK(*kv.find("epochs") == "4");
  CHECK(kv.find("missing") == nullptr);
}

TEST_CASE("malformed lines carry their line number") {
  try {
    parse_kv_text("lr = 1\nbroken line\n", "cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with the full key list") {
  KvConfig kv;
  kv.set("learning_rate", "0.1", 3);
  try {
    experiment_from_kv(kv);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("learning_rate") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    for (const std::string& key : valid_config_keys()) {
      CHECK(msg.find(key) != std::string::npos);
    }
  }
}

TEST_CASE("typed extraction fills every documented key") {
  const KvConfig kv = parse_kv_text(
      "stages = 4\n"
      "widths = 8,16,32,64\n"
      "ia_placement = stage2,stage3\n"
      "ia_modules = sia\n"
      "patch_sizes = 1,2\n"
      "fusion = max\n"
      "sigma1 = 4.5\n"
      "sigma2 = 9\n"
      "sigma_auto = false\n"
      "arrangement = parallel\n"
      "remove_last_stride = false\n"
      "use_location = false\n"
      "num_ids = 6\n"
      "images_per_id = 5\n"
      "noise_std = 0.01\n"
      "seed = 99\n"
      "lr = 0.01\n"
      "batch = 8\n"
      "epochs = 3\n"
      "ablate_axis = variant\n"
      "ablate_seeds = 1,2,3\n",
      "inline");
  const ExperimentConfig cfg = experiment_from_kv(kv);
  CHECK(cfg.model.widths[0] == 8);
  CHECK(cfg.model.ia_placement == std::set<int>{2, 3});
  CHECK(cfg.model.ia_modules == IAModules::kSiaOnly);
  CHECK(cfg.model.ia.patch_sizes == std::vector<int>{1, 2});
  CHECK(cfg.model.ia.fusion == relation::Fusion::kMax);
  CHECK(cfg.model.ia.sigma1 == 4.5);
  CHECK(cfg.model.sigma_auto == false);
  CHECK(cfg.model.ia.arrangement == Arrangement::kParallel);
  CHECK(cfg.model.remove_last_stride == false);
  CHECK(cfg.model.ia.use_location == false);
  CHECK(cfg.model.num_ids == 6);
  CHECK(cfg.data.images_per_id == 5);
  CHECK(cfg.data.noise_std == 0.01);
  CHECK(cfg.hyper.seed == 99);
  CHECK(cfg.hyper.lr == 0.01);
  CHECK(cfg.hyper.batch == 8);
  CHECK(cfg.hyper.epochs == 3);
  CHECK(cfg.ablate_axis == "variant");
  CHECK(cfg.ablate_seeds == std::vector<uint64_t>{1, 2, 3});
}

TEST_CASE("overrides apply after the file") {
  KvConfig kv = parse_kv_text("lr = 0.1\n", "inline");
  apply_override(kv, "lr=0.5");
  apply_override(kv, "epochs=2");
  const ExperimentConfig cfg = experiment_from_kv(kv);
  CHECK(cfg.hyper.lr == 0.5);
  CHECK(cfg.hyper.epochs == 2);
  CHECK_THROWS_AS(apply_override(kv, "no-equals"), ConfigError);
}

TEST_CASE("pgm writes valid P5 and normalizes to the max") {
  const auto dir = std::filesystem::temp_directory_path() / "ia_test_pgm";
  std::filesystem::create_directories(dir);
  Tensor img({2, 3}, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
  save_pgm_normalized(dir / "x.pgm", img);
  const PgmImage back = load_pgm(dir / "x.pgm");
  CHECK(back.h == 2);
  CHECK(back.w == 3);
  CHECK(back.pixels[0] == 0);
  CHECK(back.pixels[5] == 255);
  CHECK(back.pixels[2] == static_cast<uint8_t>(0.2 / 0.5 * 255.0 + 0.5));
  std::filesystem::remove_all(dir);
}

#include <doctest.h>

#include <filesystem>
#include <set>

#include "ia/dataset.hpp"
#include "support/oracles.hpp"

using namespace ia;

TEST_CASE("nuisance-free rendering is constant per identity") {
  SyntheticSpec spec;
  spec.num_ids = 3;
  spec.images_per_id = 4;
  spec.translation_max = 0.0;
  spec.scale_min = spec.scale_max = 1.0;
  spec.noise_std = 0.0;
  spec.seed = 5;
  const Dataset ds = generate(spec);
  const int64_t per = ds.train.images.size() / ds.train.images.extent(0);
  for (int id = 0; id < 3; ++id) {
    const double* first = ds.train.images.data() + (id * 4) * per;
    for (int j = 1; j < 4; ++j) {
      const double* other = ds.train.images.data() + (id * 4 + j) * per;
      for (int64_t t = 0; t < per; ++t) CHECK(first[t] == other[t]);
    }
  }
}

TEST_CASE("generation is bit-deterministic for a fixed seed") {
  SyntheticSpec spec;
  spec.num_ids = 4;
  spec.images_per_id = 3;
  spec.seed = 77;
  const Dataset a = generate(spec);
  const Dataset b = generate(spec);
  CHECK(a.train.images == b.train.images);
  CHECK(a.query.images == b.query.images);
  CHECK(a.gallery.images == b.gallery.images);
  CHECK(a.train.labels == b.train.labels);

  SyntheticSpec other = spec;
  other.seed = 78;
  CHECK(!(generate(other).train.images == a.train.images));
}

TEST_CASE("splits share identities but never images") {
  SyntheticSpec spec;
  spec.num_ids = 5;
  spec.images_per_id = 3;
  spec.seed = 9;
  const Dataset ds = generate(spec);
  const std::set<int> train_ids(ds.train.labels.begin(), ds.train.labels.end());
  const std::set<int> query_ids(ds.query.labels.begin(), ds.query.labels.end());
  const std::set<int> gallery_ids(ds.gallery.labels.begin(), ds.gallery.labels.end());
  CHECK(train_ids == query_ids);
  CHECK(train_ids == gallery_ids);

  // Distinct nuisance draws: a query image never equals a gallery image.
  const int64_t per = ds.query.images.size() / ds.query.images.extent(0);
  for (int64_t qi = 0; qi < ds.query.images.extent(0); ++qi) {
    for (int64_t gi = 0; gi < ds.gallery.images.extent(0); ++gi) {
      bool same = true;
      for (int64_t t = 0; t < per && same; ++t) {
        same = ds.query.images[qi * per + t] == ds.gallery.images[gi * per + t];
      }
      CHECK(!same);
    }
  }
}

TEST_CASE("pixels stay in [0,1] under noise and jitter") {
  SyntheticSpec spec;
  spec.num_ids = 3;
  spec.images_per_id = 3;
  spec.noise_std = 0.3;
  spec.seed = 123;
  const Dataset ds = generate(spec);
  for (int64_t i = 0; i < ds.train.images.size(); ++i) {
    CHECK(ds.train.images[i] >= 0.0);
    CHECK(ds.train.images[i] <= 1.0);
  }
}

TEST_CASE("identity factor collisions follow the palette combinatorics") {
  // P(two identities share all three part colors) = 1/8^3 = 1/512.
  Rng rng(2718);
  const int n = 2000;
  std::vector<IdentityFactors> ids;
  ids.reserve(n);
  for (int i = 0; i < n; ++i) ids.push_back(sample_identity(rng));
  int64_t collisions = 0;
  int64_t pairs = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      ++pairs;
      if (ids[i].head_color == ids[j].head_color && ids[i].torso_color == ids[j].torso_color &&
          ids[i].leg_color == ids[j].leg_color) {
        ++collisions;
      }
    }
  }
  const double expect = static_cast<double>(pairs) / 512.0;  // palette oracle
  const double sigma = std::sqrt(expect);
  CHECK(std::abs(static_cast<double>(collisions) - expect) < 6.0 * sigma);
}

TEST_CASE("invalid specs are rejected") {
  SyntheticSpec spec;
  spec.num_ids = 1;
  CHECK_THROWS_AS(generate(spec), ConfigError);
  SyntheticSpec tiny;
  tiny.canvas_h = 16;
  tiny.canvas_w = 8;
  CHECK_THROWS_AS(generate(tiny), ConfigError);
  SyntheticSpec bad_scale;
  bad_scale.scale_min = 1.4;
  bad_scale.scale_max = 0.7;
  CHECK_THROWS_AS(generate(bad_scale), ConfigError);
}

TEST_CASE("dataset io round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ia_test_ds";
  std::filesystem::remove_all(dir);
  SyntheticSpec spec;
  spec.num_ids = 2;
  spec.images_per_id = 2;
  spec.query_per_id = 1;
  spec.gallery_per_id = 2;
  spec.seed = 3;
  const Dataset ds = generate(spec);
  save_dataset(dir, ds);
  const Dataset back = load_dataset(dir);
  CHECK(back.train.labels == ds.train.labels);
  CHECK(back.query.images.shape() == ds.query.images.shape());
  CHECK(oracle::max_abs_diff(back.gallery.images, ds.gallery.images) < 1e-6);
  std::filesystem::remove_all(dir);
}

TEST_CASE("gather pulls rows by index") {
  SyntheticSpec spec;
  spec.num_ids = 2;
  spec.images_per_id = 3;
  spec.seed = 4;
  const Dataset ds = generate(spec);
  const std::vector<int64_t> idx{4, 0};
  const LabeledImages batch = gather(ds.train, idx);
  CHECK(batch.labels.size() == 2);
  CHECK(batch.labels[0] == ds.train.labels[4]);
  const int64_t per = ds.train.images.size() / 6;
  for (int64_t t = 0; t < per; ++t) {
    CHECK(batch.images[t] == ds.train.images[4 * per + t]);
    CHECK(batch.images[per + t] == ds.train.images[t]);
  }
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ia/tensor.hpp"
#include "ia/tensor_io.hpp"

using namespace ia;

TEST_CASE("tensor shape and data invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
  CHECK(t.reshaped({3, 2}).extent(0) == 3);
  CHECK(Tensor::scalar(4.5).item() == 4.5);
  CHECK_THROWS_AS(t.item(), UsageError);
  CHECK_THROWS_AS(t.at({2, 0}), IndexError);
  CHECK(t.at({1, 2}) == 0.0);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform_int(17) == b.uniform_int(17));
  }
  Rng c(43);
  CHECK(Rng(42).uniform() != c.uniform());
}

TEST_CASE("iatn round trip through f32") {
  Rng rng(7);
  const Tensor t = rng.uniform_tensor({2, 3, 4}, -5.0, 5.0);
  std::string bytes;
  save_iatn_bytes(bytes, t);
  CHECK(bytes.substr(0, 4) == "IATN");
  const Tensor back = load_iatn_bytes(bytes);
  CHECK(back.shape() == t.shape());
  for (int64_t i = 0; i < t.size(); ++i) {
    CHECK(back[i] == doctest::Approx(t[i]).epsilon(1e-6));
    CHECK(back[i] == static_cast<double>(static_cast<float>(t[i])));
  }
}

TEST_CASE("iatn rejects bad magic and truncation") {
  Rng rng(8);
  std::string bytes;
  save_iatn_bytes(bytes, rng.uniform_tensor({3, 3}, 0.0, 1.0));

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(load_iatn_bytes(bad), IoError);

  CHECK_THROWS_AS(load_iatn_bytes(bytes.substr(0, bytes.size() - 1)), IoError);
  CHECK_THROWS_AS(load_iatn_bytes(bytes.substr(0, 7)), IoError);
  CHECK_THROWS_AS(load_iatn_bytes(bytes + "x"), IoError);
}

TEST_CASE("iatn file io and grid sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "ia_test_io";
  std::filesystem::create_directories(dir);
  Rng rng(9);
  const Tensor t = rng.uniform_tensor({6, 6}, 0.0, 1.0);
  save_iatn(dir / "t.iatn", t);
  CHECK(load_iatn(dir / "t.iatn").shape() == t.shape());
  save_grid_sidecar(dir / "t.grid", 3, 2);
  const auto [h, w] = load_grid_sidecar(dir / "t.grid");
  CHECK(h == 3);
  CHECK(w == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ia_test_manifest";
  std::filesystem::remove_all(dir);
  Rng rng(10);
  TensorManifest m;
  m.add("stage1.kernel", rng.uniform_tensor({4, 3, 3, 3}, -1.0, 1.0));
  m.add("cls.bias", rng.uniform_tensor({5}, -1.0, 1.0));
  save_manifest_dir(dir, m);
  const TensorManifest back = load_manifest_dir(dir);
  CHECK(back.entries.size() == 2);
  CHECK(back.entries[0].first == "stage1.kernel");
  CHECK(back.get("cls.bias").size() == 5);
  CHECK(back.has("stage1.kernel"));
  CHECK(!back.has("nope"));
  CHECK_THROWS_AS(back.get("nope"), IoError);
  std::filesystem::remove_all(dir);
}

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ia/error.hpp"

namespace ia {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Dense row-major tensor of doubles. Rank 0 is a scalar. All extents must be
// positive; the data length always equals the product of extents.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}  // rank-0 scalar, value 0
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t extent(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Flat offset of a multi-index; bounds-checked.
  int64_t offset(const std::vector<int64_t>& idx) const;
  double& at(const std::vector<int64_t>& idx) { return data_[static_cast<size_t>(offset(idx))]; }
  double at(const std::vector<int64_t>& idx) const {
    return data_[static_cast<size_t>(offset(idx))];
  }

  // Copy with a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;
  double item() const;  // requires size() == 1

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Deterministic random source. mt19937_64 has a fully specified stream and the
// distributions below are hand-rolled, so sequences are reproducible across
// platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int64_t uniform_int(int64_t n);  // uniform in [0, n)
  double normal(double mean = 0.0, double stddev = 1.0);

  Tensor uniform_tensor(Shape shape, double lo, double hi);
  Tensor normal_tensor(Shape shape, double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(uniform_int(i + 1))]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ia

#include "ia/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ia {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

static void check_extents(const Shape& shape) {
  for (int64_t e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (static_cast<int64_t>(data_.size()) != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

int64_t Tensor::offset(const std::vector<int64_t>& idx) const {
  if (idx.size() != shape_.size()) {
    throw IndexError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                     std::to_string(shape_.size()));
  }
  int64_t off = 0;
  for (size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] < 0 || idx[a] >= shape_[a]) {
      throw IndexError("index " + std::to_string(idx[a]) + " out of range for axis " +
                       std::to_string(a) + " of shape " + shape_str(shape_));
    }
    off = off * shape_[a] + idx[a];
  }
  return off;
}

Tensor Tensor::reshaped(Shape shape) const {
  check_extents(shape);
  if (shape_numel(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

int64_t Rng::uniform_int(int64_t n) {
  // Rejection sampling keeps the draw unbiased.
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int64_t>(x % un);
}

double Rng::normal(double mean, double stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  // Box-Muller on the specified mt19937_64 stream.
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return mean + stddev * (r * std::cos(theta));
}

Tensor Rng::uniform_tensor(Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
  return t;
}

Tensor Rng::normal_tensor(Shape shape, double mean, double stddev) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = normal(mean, stddev);
  return t;
}

}  // namespace ia

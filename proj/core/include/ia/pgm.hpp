#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ia/tensor.hpp"

namespace ia {

// Binary PGM (P5), maxval 255.
void save_pgm(const std::filesystem::path& file, int64_t h, int64_t w,
              const std::vector<uint8_t>& pixels);

// Max-normalizes a [H,W] tensor of nonnegative values to [0,255] and writes P5.
void save_pgm_normalized(const std::filesystem::path& file, const Tensor& image);

struct PgmImage {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<uint8_t> pixels;
};

PgmImage load_pgm(const std::filesystem::path& file);

}  // namespace ia

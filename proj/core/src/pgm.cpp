#include "ia/pgm.hpp"

#include <algorithm>
#include <fstream>

namespace ia {

void save_pgm(const std::filesystem::path& file, int64_t h, int64_t w,
              const std::vector<uint8_t>& pixels) {
  if (static_cast<int64_t>(pixels.size()) != h * w) {
    throw DimensionError("pgm: " + std::to_string(pixels.size()) + " pixels for " +
                         std::to_string(h) + "x" + std::to_string(w));
  }
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << "P5\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!os) throw IoError("write failed: " + file.string());
}

void save_pgm_normalized(const std::filesystem::path& file, const Tensor& image) {
  if (image.rank() != 2) {
    throw DimensionError("pgm expects [H,W], got " + shape_str(image.shape()));
  }
  double mx = 0.0;
  for (int64_t i = 0; i < image.size(); ++i) mx = std::max(mx, image[i]);
  const double scale = mx > 0.0 ? 255.0 / mx : 0.0;
  std::vector<uint8_t> pixels(static_cast<size_t>(image.size()));
  for (int64_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image[i] * scale, 0.0, 255.0);
    pixels[static_cast<size_t>(i)] = static_cast<uint8_t>(v + 0.5);
  }
  save_pgm(file, image.extent(0), image.extent(1), pixels);
}

PgmImage load_pgm(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  std::string magic;
  is >> magic;
  if (magic != "P5") throw IoError(file.string() + ": not a P5 pgm");
  PgmImage img;
  int maxval = 0;
  is >> img.w >> img.h >> maxval;
  if (!is || img.w <= 0 || img.h <= 0 || maxval != 255) {
    throw IoError(file.string() + ": bad pgm header");
  }
  is.get();  // single whitespace after maxval
  img.pixels.resize(static_cast<size_t>(img.w * img.h));
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw IoError(file.string() + ": truncated pgm payload");
  }
  return img;
}

}  // namespace ia

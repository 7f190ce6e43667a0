#include "ia/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace ia {

namespace {

constexpr char kMagic[4] = {'I', 'A', 'T', 'N'};

void put_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_iatn_bytes(std::string& out, const Tensor& t) {
  out.clear();
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(t.rank()));
  for (int a = 0; a < t.rank(); ++a) {
    put_u32_le(out, static_cast<uint32_t>(t.extent(a)));
  }
  for (int64_t i = 0; i < t.size(); ++i) {
    const float f = static_cast<float>(t[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(out, bits);
  }
}

Tensor load_iatn_bytes(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t n = bytes.size();
  if (n < 5 || std::memcmp(p, kMagic, 4) != 0) {
    throw IoError("not an IATN tensor: bad magic");
  }
  const int rank = p[4];
  size_t off = 5;
  if (n < off + 4u * static_cast<size_t>(rank)) throw IoError("IATN header truncated");
  Shape shape(static_cast<size_t>(rank));
  for (int a = 0; a < rank; ++a) {
    shape[static_cast<size_t>(a)] = get_u32_le(p + off);
    off += 4;
  }
  const int64_t numel = shape_numel(shape);
  if (n != off + 4u * static_cast<size_t>(numel)) {
    throw IoError("IATN payload truncated: expected " + std::to_string(numel) +
                  " f32 values after header");
  }
  std::vector<double> data(static_cast<size_t>(numel));
  for (int64_t i = 0; i < numel; ++i) {
    const uint32_t bits = get_u32_le(p + off);
    off += 4;
    float f;
    std::memcpy(&f, &bits, 4);
    data[static_cast<size_t>(i)] = static_cast<double>(f);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_iatn(const std::filesystem::path& file, const Tensor& t) {
  std::string bytes;
  save_iatn_bytes(bytes, t);
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + file.string());
}

Tensor load_iatn(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return load_iatn_bytes(bytes);
  } catch (const IoError& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

void save_grid_sidecar(const std::filesystem::path& file, int64_t h, int64_t w) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << "grid=" << h << "x" << w << "\n";
}

std::pair<int64_t, int64_t> load_grid_sidecar(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open " + file.string());
  std::string line;
  std::getline(is, line);
  int64_t h = 0, w = 0;
  if (std::sscanf(line.c_str(), "grid=%ldx%ld", &h, &w) != 2 || h <= 0 || w <= 0) {
    throw IoError("bad grid sidecar " + file.string() + ": '" + line + "'");
  }
  return {h, w};
}

const Tensor& TensorManifest::get(const std::string& name) const {
  for (const auto& [n, t] : entries) {
    if (n == name) return t;
  }
  throw IoError("manifest has no tensor named '" + name + "'");
}

bool TensorManifest::has(const std::string& name) const {
  for (const auto& [n, t] : entries) {
    if (n == name) return true;
  }
  return false;
}

namespace {

std::string sanitize(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == '\t' || c == ' ') c = '_';
  }
  return s;
}

}  // namespace

void save_manifest_dir(const std::filesystem::path& dir, const TensorManifest& m) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "manifest.tsv", std::ios::trunc);
  if (!os) throw IoError("cannot open manifest in " + dir.string());
  for (const auto& [name, t] : m.entries) {
    const std::string file = sanitize(name) + ".iatn";
    save_iatn(dir / file, t);
    os << name << "\t" << file << "\n";
  }
}

TensorManifest load_manifest_dir(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.tsv");
  if (!is) throw IoError("cannot open manifest in " + dir.string());
  TensorManifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed manifest line: '" + line + "'");
    m.add(line.substr(0, tab), load_iatn(dir / line.substr(tab + 1)));
  }
  return m;
}

}  // namespace ia

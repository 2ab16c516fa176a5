#include "srft/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace srft {

namespace {

[[noreturn]] void fail(const std::string& msg, size_t offset) {
  throw std::runtime_error("netpbm: " + msg + " (at byte " + std::to_string(offset) + ")");
}

/// Skips whitespace and '#' comments; returns false at end of data.
bool skip_space(const std::vector<unsigned char>& b, size_t& p) {
  while (p < b.size()) {
    const unsigned char c = b[p];
    if (c == '#') {
      while (p < b.size() && b[p] != '\n') ++p;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f') {
      ++p;
    } else {
      return true;
    }
  }
  return false;
}

int parse_int(const std::vector<unsigned char>& b, size_t& p, const char* what) {
  if (!skip_space(b, p)) fail(std::string("missing ") + what, p);
  if (b[p] < '0' || b[p] > '9') {
    fail(std::string("expected digit for ") + what, p);
  }
  long v = 0;
  while (p < b.size() && b[p] >= '0' && b[p] <= '9') {
    v = v * 10 + (b[p] - '0');
    if (v > 1 << 24) fail(std::string(what) + " out of range", p);
    ++p;
  }
  return int(v);
}

}  // namespace

Tensor decode_image(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    fail("bad magic, expected P5 or P6", 0);
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  size_t p = 2;
  const int w = parse_int(bytes, p, "width");
  const int h = parse_int(bytes, p, "height");
  const size_t maxval_at = p;
  const int maxval = parse_int(bytes, p, "maxval");
  if (w <= 0 || h <= 0) fail("dimensions must be positive", maxval_at);
  if (maxval != 255) {
    fail("maxval must be 255, got " + std::to_string(maxval), maxval_at);
  }
  if (p >= bytes.size()) fail("missing separator before payload", p);
  const unsigned char sep = bytes[p];
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    fail("expected single whitespace before payload", p);
  }
  ++p;
  const size_t need = size_t(w) * h * channels;
  if (bytes.size() - p < need) {
    fail("truncated payload: need " + std::to_string(need) + " bytes, have " +
             std::to_string(bytes.size() - p),
         p);
  }
  Tensor t(1, channels, h, w);
  const unsigned char* src = bytes.data() + p;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        t.at(0, c, y, x) = float(src[(size_t(y) * w + x) * channels + c]) / 255.f;
      }
    }
  }
  return t;
}

std::vector<unsigned char> encode_image(const Tensor& t) {
  if (t.n() != 1 || (t.c() != 1 && t.c() != 3)) {
    throw std::invalid_argument("encode_image: need shape (1,1,H,W) or (1,3,H,W), got " +
                                t.shape().str());
  }
  const int channels = t.c(), h = t.h(), w = t.w();
  std::string header = std::string(channels == 3 ? "P6" : "P5") + "\n" +
                       std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + size_t(w) * h * channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const float v = std::clamp(t.at(0, c, y, x), 0.f, 1.f);
        out.push_back((unsigned char)(std::floor(v * 255.f + 0.5f)));
      }
    }
  }
  return out;
}

Tensor load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open image file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(e.what()) + " in '" + path + "'");
  }
}

void save_image(const Tensor& t, const std::string& path) {
  const std::vector<unsigned char> bytes = encode_image(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

std::vector<std::pair<std::string, Tensor>> load_image_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("'" + dir + "' is not a directory");
  }
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(paths.size());
  for (const auto& p : paths) {
    out.emplace_back(p.stem().string(), load_image(p.string()));
  }
  return out;
}

}  // namespace srft

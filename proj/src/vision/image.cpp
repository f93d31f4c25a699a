#include "semlink/vision/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace semlink::vision {

namespace {

[[noreturn]] void ppm_error(const std::filesystem::path& path, size_t offset,
                            const std::string& what) {
  throw std::runtime_error("ppm " + path.string() + ": " + what + " at byte " +
                           std::to_string(offset));
}

// whitespace/comment-aware token scanner over the header bytes
struct HeaderScan {
  const std::vector<char>& buf;
  size_t pos = 0;

  void skip_space() {
    while (pos < buf.size()) {
      char c = buf[pos];
      if (c == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  long token(const std::filesystem::path& path, const char* what) {
    skip_space();
    size_t start = pos;
    long v = 0;
    bool any = false;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
      v = v * 10 + (buf[pos] - '0');
      ++pos;
      any = true;
      if (v > 1000000) ppm_error(path, start, std::string("unreasonable ") + what);
    }
    if (!any) ppm_error(path, start, std::string("expected ") + what);
    return v;
  }
};

}  // namespace

ImageTensor load_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("ppm " + path.string() + ": cannot open");
  std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6')
    ppm_error(path, 0, "not a P6 file (malformed header)");
  HeaderScan s{buf, 2};
  long w = s.token(path, "width");
  long h = s.token(path, "height");
  size_t maxval_at = s.pos;
  long maxval = s.token(path, "maxval");
  if (maxval != 255) ppm_error(path, maxval_at, "unsupported maxval " + std::to_string(maxval));
  if (s.pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[s.pos])))
    ppm_error(path, s.pos, "missing delimiter after maxval");
  ++s.pos;  // single whitespace byte before the raster
  size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
  if (buf.size() - s.pos < need)
    ppm_error(path, buf.size(), "truncated payload (need " + std::to_string(need) + " bytes, have " +
                                    std::to_string(buf.size() - s.pos) + ")");
  ImageTensor img(static_cast<int>(h), static_cast<int>(w), 3);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data()) + s.pos;
  for (size_t i = 0; i < need; ++i) img.data[i] = static_cast<float>(p[i]) / 255.0f;
  return img;
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.channels != 3)
    throw std::invalid_argument("ppm save: expected 3 channels, got " +
                                std::to_string(img.channels));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("ppm " + path.string() + ": cannot open for write");
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raster(img.numel());
  for (size_t i = 0; i < img.numel(); ++i) {
    float v = img.data[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    raster[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  f.write(reinterpret_cast<const char*>(raster.data()),
          static_cast<std::streamsize>(raster.size()));
  if (!f) throw std::runtime_error("ppm " + path.string() + ": write failed");
}

std::vector<float> to_gray(const ImageTensor& img) {
  std::vector<float> g(static_cast<size_t>(img.height) * img.width);
  if (img.channels == 1) {
    g = img.data;
    return g;
  }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      g[static_cast<size_t>(y) * img.width + x] =
          0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
  return g;
}

}  // namespace semlink::vision

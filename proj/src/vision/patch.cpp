#include "semlink/vision/patch.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace semlink::vision {

PatchGrid::PatchGrid(int height, int width, int patch_size) : patch(patch_size) {
  if (patch_size <= 0 || height % patch_size != 0 || width % patch_size != 0)
    throw std::invalid_argument("patch grid: " + std::to_string(height) + "x" +
                                std::to_string(width) + " not divisible by patch size " +
                                std::to_string(patch_size));
  rows = height / patch_size;
  cols = width / patch_size;
}

int PatchGrid::patch_of(double x, double y) const {
  int c = static_cast<int>(std::floor(x / patch));
  int r = static_cast<int>(std::floor(y / patch));
  if (c < 0) c = 0;
  if (r < 0) r = 0;
  if (c >= cols) c = cols - 1;
  if (r >= rows) r = rows - 1;
  return r * cols + c;
}

std::vector<std::vector<float>> patchify(const ImageTensor& img, int patch_size) {
  PatchGrid grid(img.height, img.width, patch_size);
  const int p = patch_size, c = img.channels;
  std::vector<std::vector<float>> out(static_cast<size_t>(grid.total()));
  for (int k = 0; k < grid.total(); ++k) {
    int py = (k / grid.cols) * p;
    int px = (k % grid.cols) * p;
    auto& dst = out[static_cast<size_t>(k)];
    dst.resize(static_cast<size_t>(p) * p * c);
    size_t i = 0;
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < c; ++ch) dst[i++] = img.at(py + y, px + x, ch);
  }
  return out;
}

ImageTensor unpatchify(const std::vector<std::vector<float>>& patches, int height, int width,
                       int channels, int patch_size) {
  PatchGrid grid(height, width, patch_size);
  if (patches.size() != static_cast<size_t>(grid.total()))
    throw std::invalid_argument("unpatchify: expected " + std::to_string(grid.total()) +
                                " patches, got " + std::to_string(patches.size()));
  ImageTensor img(height, width, channels);
  const int p = patch_size;
  for (int k = 0; k < grid.total(); ++k) {
    const auto& src = patches[static_cast<size_t>(k)];
    if (src.size() != static_cast<size_t>(p) * p * channels)
      throw std::invalid_argument("unpatchify: patch " + std::to_string(k) + " has wrong size");
    int py = (k / grid.cols) * p;
    int px = (k % grid.cols) * p;
    size_t i = 0;
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < channels; ++ch) img.at(py + y, px + x, ch) = src[i++];
  }
  return img;
}

}  // namespace semlink::vision

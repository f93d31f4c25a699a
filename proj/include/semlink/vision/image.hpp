#pragma once

#include <filesystem>
#include <vector>

namespace semlink::vision {

// H x W x C image, interleaved row-major, values normalized to [0,1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;  // size H*W*C

  ImageTensor() = default;
  ImageTensor(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, 0.0f) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t numel() const { return data.size(); }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Binary PPM (P6, maxval 255) is the canonical fixture format.
// load normalizes 8-bit samples to [0,1]; save rounds back to 8 bits, so
// load(save(img)) reproduces the 8-bit pixel values exactly.
ImageTensor load_image(const std::filesystem::path& path);
void save_image(const ImageTensor& img, const std::filesystem::path& path);

// Rec.601 luma (also used by the keypoint detector and SSIM).
std::vector<float> to_gray(const ImageTensor& img);

}  // namespace semlink::vision

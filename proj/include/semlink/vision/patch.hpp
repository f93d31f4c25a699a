#pragma once

#include <vector>

#include "semlink/vision/image.hpp"

namespace semlink::vision {

// Regular patch grid over an image. Patch k is row-major: it covers rows
// [floor(k/cols)*P, ...) and cols [(k mod cols)*P, ...).
struct PatchGrid {
  int patch = 16;
  int rows = 0;
  int cols = 0;

  PatchGrid() = default;
  PatchGrid(int height, int width, int patch_size);
  int total() const { return rows * cols; }
  int patch_of(double x, double y) const;  // half-open cells
};

// patches[k] holds the patch's pixels row-major (y, x, c); exact inverse pair.
std::vector<std::vector<float>> patchify(const ImageTensor& img, int patch_size);
ImageTensor unpatchify(const std::vector<std::vector<float>>& patches, int height, int width,
                       int channels, int patch_size);

}  // namespace semlink::vision

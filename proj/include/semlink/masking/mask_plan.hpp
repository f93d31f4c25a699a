#pragma once

#include <vector>

#include "semlink/detect/detections.hpp"
#include "semlink/vision/image.hpp"
#include "semlink/vision/patch.hpp"

namespace semlink::masking {

// Adaptive-preprocess output: importance permutation, mask ratio, per-pixel
// binary mask (constant within each patch), and patch accounting.
struct MaskPlan {
  std::vector<int> order;        // patch indices, most important first
  double mr = 0;                 // [0, 0.7]
  vision::ImageTensor mask;      // H x W x C of 0/1
  std::vector<uint8_t> masked;   // per patch, 1 if masked
  std::vector<uint8_t> object;   // per patch, 1 if it intersects a detection
  int n_total = 0;
  int n_unmasked = 0;
  vision::PatchGrid grid;

  int n_masked() const { return n_total - n_unmasked; }
};

// Patches intersecting any detection come first (descending keypoint count
// among themselves), then the rest by descending count; ties break toward the
// lower row-major index.
std::vector<int> importance_order(const detect::DetectionSet& det,
                                  const std::vector<int>& keypoint_counts,
                                  const vision::PatchGrid& grid);

// Per-patch object flags (any bbox overlap of positive area).
std::vector<uint8_t> object_patches(const detect::DetectionSet& det,
                                    const vision::PatchGrid& grid);

// Masks the tail of the importance order, never an object patch:
// masked count = min(floor(mr * n_total), n_total - |object patches|).
MaskPlan build_mask_plan(const std::vector<int>& order, double mr,
                         const detect::DetectionSet& det, const vision::PatchGrid& grid,
                         int height, int width, int channels);

// p = s (.) m; masked pixels exactly zero.
vision::ImageTensor apply_mask(const vision::ImageTensor& s, const MaskPlan& plan);

}  // namespace semlink::masking

#pragma once

#include <filesystem>
#include <vector>

#include "semlink/codec/train.hpp"
#include "semlink/detect/detections.hpp"
#include "semlink/vision/image.hpp"
#include "semlink/vision/keypoints.hpp"

namespace semlink::cli {

// One evaluation-ready image: pixels, annotations, and the precomputed
// masking inputs (keypoint counts, importance order, object-area fraction).
struct EvalImage {
  std::filesystem::path path;
  vision::ImageTensor image;
  detect::DetectionSet dets;
  std::vector<int> kp_counts;
  std::vector<int> order;
  double object_area_frac = 0;
};

std::vector<EvalImage> load_dataset(const std::filesystem::path& dir, int max_count,
                                    int patch_size);

std::vector<codec::TrainSample> to_train_samples(const std::vector<EvalImage>& images);

// Deterministic synthetic scenes: smooth gradient backgrounds with one or
// two textured shapes, plus detection sidecars for the shapes. Stands in
// for a photo corpus at desk scale.
void generate_dataset(const std::filesystem::path& dir, int count, int size, uint64_t seed);

}  // namespace semlink::cli

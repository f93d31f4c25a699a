#pragma once

#include <filesystem>
#include <vector>

#include "semlink/vision/image.hpp"
#include "semlink/vision/patch.hpp"

namespace semlink::vision {

struct Keypoint {
  double x = 0;        // input-image coordinates
  double y = 0;
  double scale = 0;    // sigma of the firing pyramid level
  double response = 0; // DoG value at the extremum
};

struct KeypointList {
  std::vector<Keypoint> points;
  bool too_small = false;  // set when the image is below the 16x16 minimum
};

struct DogParams {
  int octaves = 3;
  int scales_per_octave = 3;       // extremum layers per octave; k = 2^(1/3)
  double sigma = 1.6;
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;        // principal-curvature ratio r
};

// Scale-space extrema of the difference-of-Gaussians pyramid (the detection
// stage of SIFT; no orientation or descriptors). Gray conversion is applied
// internally.
KeypointList dog_keypoints(const ImageTensor& img, const DogParams& params = {});

// Half-open patch cells; a keypoint on a boundary belongs to the right/lower
// patch. Counts sum to the number of keypoints.
std::vector<int> keypoints_per_patch(const KeypointList& kps, const PatchGrid& grid);

// CSV dump with header "x,y,scale,response".
void save_keypoints_csv(const KeypointList& kps, const std::filesystem::path& path);

}  // namespace semlink::vision

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace semlink::detect {

struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixels, x0<x1, y0<y1
  double area() const { return (x1 - x0) * (y1 - y0); }
};

double iou(const BBox& a, const BBox& b);

struct Detection {
  std::string cls;
  double conf = 0;  // [0,1]
  BBox box;
};

enum class DetectionSource { kSidecar, kExternal, kStub };

struct DetectionSet {
  std::vector<Detection> items;
  DetectionSource source = DetectionSource::kStub;

  bool empty() const { return items.empty(); }
  size_t size() const { return items.size(); }
};

// Sidecar file "<image path>.det.json": array of
// {"class": str, "conf": num, "bbox": [x0,y0,x1,y1]}.
// Missing file yields an empty stub-tagged set; malformed JSON or a bbox
// outside [0,width]x[0,height] is an error.
DetectionSet load_detections(const std::filesystem::path& image_path, int width, int height);

std::filesystem::path sidecar_path(const std::filesystem::path& image_path);
void save_detections(const DetectionSet& dets, const std::filesystem::path& sidecar);

// Runs `command_template` ({image} substituted) expecting the sidecar JSON
// schema on stdout. Non-zero exit, timeout, or schema violations are errors.
DetectionSet run_external_detector(const std::string& command_template,
                                   const std::filesystem::path& image_path, int width,
                                   int height, int timeout_ms = 30000);

}  // namespace semlink::detect

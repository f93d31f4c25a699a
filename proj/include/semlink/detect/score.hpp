#pragma once

#include <string>

#include "semlink/detect/detections.hpp"

namespace semlink::detect {

struct CSResult {
  double cs = 1.0;  // [0,1]
  int matched = 0;
  int unmatched = 0;
};

// Per-image confidence score: mean over ground-truth objects of the best
// confidence among same-class predictions with IoU >= 0.5 (0 when none).
// An empty ground truth scores 1 (nothing to preserve).
CSResult confidence_score(const DetectionSet& gt, const DetectionSet& pred);

struct CombinedMetrics {
  double psnr_cs = 0;  // (clamp(PSNR,0,40)/40)/2 + CS/2
  double ssim_cs = 0;  // clamp(SSIM,0,1)/2 + CS/2
};

CombinedMetrics combined_metrics(double psnr_db, double ssim, double cs);

// "0.911/0.936"-style PSNR+CS/SSIM+CS record used in report summaries.
std::string format_metric_pair(const CombinedMetrics& m);
CombinedMetrics parse_metric_pair(const std::string& text);

}  // namespace semlink::detect

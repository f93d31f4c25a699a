#include "semlink/detect/score.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace semlink::detect {

CSResult confidence_score(const DetectionSet& gt, const DetectionSet& pred) {
  CSResult res;
  if (gt.empty()) {
    res.cs = 1.0;
    return res;
  }
  double total = 0;
  for (const auto& g : gt.items) {
    double best = 0;
    bool hit = false;
    for (const auto& p : pred.items) {
      if (p.cls != g.cls) continue;
      if (iou(p.box, g.box) < 0.5) continue;
      hit = true;
      best = std::max(best, p.conf);
    }
    if (hit)
      res.matched += 1;
    else
      res.unmatched += 1;
    total += best;
  }
  res.cs = total / static_cast<double>(gt.size());
  return res;
}

CombinedMetrics combined_metrics(double psnr_db, double ssim, double cs) {
  if (cs < 0 || cs > 1) throw std::invalid_argument("combined_metrics: cs outside [0,1]");
  double p = std::clamp(psnr_db, 0.0, 40.0) / 40.0;
  double s = std::clamp(ssim, 0.0, 1.0);
  CombinedMetrics m;
  m.psnr_cs = p * 0.5 + cs * 0.5;
  m.ssim_cs = s * 0.5 + cs * 0.5;
  return m;
}

std::string format_metric_pair(const CombinedMetrics& m) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f/%.3f", m.psnr_cs, m.ssim_cs);
  return buf;
}

CombinedMetrics parse_metric_pair(const std::string& text) {
  CombinedMetrics m;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf/%lf%c", &m.psnr_cs, &m.ssim_cs, &extra) != 2)
    throw std::invalid_argument("metric pair: expected 'a/b', got '" + text + "'");
  return m;
}

}  // namespace semlink::detect

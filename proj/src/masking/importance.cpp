#include <algorithm>
#include <stdexcept>

#include "semlink/masking/mask_plan.hpp"

namespace semlink::masking {

std::vector<uint8_t> object_patches(const detect::DetectionSet& det,
                                    const vision::PatchGrid& grid) {
  std::vector<uint8_t> obj(static_cast<size_t>(grid.total()), 0);
  const double p = grid.patch;
  for (const auto& d : det.items) {
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c) {
        double px0 = c * p, px1 = (c + 1) * p;
        double py0 = r * p, py1 = (r + 1) * p;
        if (d.box.x0 < px1 && d.box.x1 > px0 && d.box.y0 < py1 && d.box.y1 > py0)
          obj[static_cast<size_t>(r * grid.cols + c)] = 1;
      }
  }
  return obj;
}

std::vector<int> importance_order(const detect::DetectionSet& det,
                                  const std::vector<int>& keypoint_counts,
                                  const vision::PatchGrid& grid) {
  const int n = grid.total();
  if (keypoint_counts.size() != static_cast<size_t>(n))
    throw std::invalid_argument("importance_order: counts length " +
                                std::to_string(keypoint_counts.size()) + " != patches " +
                                std::to_string(n));
  std::vector<uint8_t> obj = object_patches(det, grid);
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (obj[static_cast<size_t>(a)] != obj[static_cast<size_t>(b)])
      return obj[static_cast<size_t>(a)] > obj[static_cast<size_t>(b)];
    if (keypoint_counts[static_cast<size_t>(a)] != keypoint_counts[static_cast<size_t>(b)])
      return keypoint_counts[static_cast<size_t>(a)] > keypoint_counts[static_cast<size_t>(b)];
    return a < b;
  });
  return order;
}

}  // namespace semlink::masking

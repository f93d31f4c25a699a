#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semlink/masking/mask_plan.hpp"

namespace semlink::masking {

MaskPlan build_mask_plan(const std::vector<int>& order, double mr,
                         const detect::DetectionSet& det, const vision::PatchGrid& grid,
                         int height, int width, int channels) {
  const int n = grid.total();
  if (order.size() != static_cast<size_t>(n))
    throw std::invalid_argument("mask plan: order length != patch count");
  {
    std::vector<uint8_t> seen(static_cast<size_t>(n), 0);
    for (int idx : order) {
      if (idx < 0 || idx >= n || seen[static_cast<size_t>(idx)])
        throw std::invalid_argument("mask plan: order is not a permutation");
      seen[static_cast<size_t>(idx)] = 1;
    }
  }
  if (mr < -1e-9 || mr > 0.7 + 1e-9)
    throw std::invalid_argument("mask plan: mr " + std::to_string(mr) + " outside [0, 0.7]");
  mr = std::clamp(mr, 0.0, 0.7);

  MaskPlan plan;
  plan.grid = grid;
  plan.order = order;
  plan.mr = mr;
  plan.object = object_patches(det, grid);
  plan.n_total = n;

  int n_obj = 0;
  for (uint8_t o : plan.object) n_obj += o;
  // epsilon guards floor against the 0.3*10=2.999... artifact
  int want = static_cast<int>(std::floor(mr * n + 1e-9));
  int target = std::min(want, n - n_obj);

  plan.masked.assign(static_cast<size_t>(n), 0);
  int done = 0;
  for (size_t i = order.size(); i-- > 0 && done < target;) {
    int patch = order[i];
    if (plan.object[static_cast<size_t>(patch)]) continue;  // objects always stay
    plan.masked[static_cast<size_t>(patch)] = 1;
    ++done;
  }
  plan.n_unmasked = n - done;

  plan.mask = vision::ImageTensor(height, width, channels);
  const int p = grid.patch;
  for (int k = 0; k < n; ++k) {
    float v = plan.masked[static_cast<size_t>(k)] ? 0.0f : 1.0f;
    int py = (k / grid.cols) * p;
    int px = (k % grid.cols) * p;
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int c = 0; c < channels; ++c) plan.mask.at(py + y, px + x, c) = v;
  }
  return plan;
}

vision::ImageTensor apply_mask(const vision::ImageTensor& s, const MaskPlan& plan) {
  if (!s.same_shape(plan.mask))
    throw std::invalid_argument("apply_mask: image does not match plan mask shape");
  vision::ImageTensor p = s;
  for (size_t i = 0; i < p.numel(); ++i) p.data[i] *= plan.mask.data[i];
  return p;
}

}  // namespace semlink::masking

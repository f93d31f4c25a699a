#include "semlink/masking/restore.hpp"

#include <stdexcept>

namespace semlink::masking {

vision::ImageTensor NeighborMeanRestorer::restore(const vision::ImageTensor& p_hat,
                                                  const MaskPlan& plan) const {
  if (!p_hat.same_shape(plan.mask))
    throw std::invalid_argument("restore: image does not match plan");
  if (plan.n_unmasked == 0)
    throw std::invalid_argument("restore: all patches masked, nothing to restore from");

  const auto& grid = plan.grid;
  const int p = grid.patch;
  const int c = p_hat.channels;
  vision::ImageTensor out = p_hat;

  // global unmasked mean, the fallback fill
  std::vector<double> global(static_cast<size_t>(c), 0.0);
  {
    long count = 0;
    for (int k = 0; k < grid.total(); ++k) {
      if (plan.masked[static_cast<size_t>(k)]) continue;
      int py = (k / grid.cols) * p, px = (k % grid.cols) * p;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int ch = 0; ch < c; ++ch) global[static_cast<size_t>(ch)] += p_hat.at(py + y, px + x, ch);
      count += p * p;
    }
    for (auto& v : global) v /= static_cast<double>(count);
  }

  for (int k = 0; k < grid.total(); ++k) {
    if (!plan.masked[static_cast<size_t>(k)]) continue;
    int r = k / grid.cols, cc = k % grid.cols;
    int py = r * p, px = cc * p;

    std::vector<double> fill(static_cast<size_t>(c), 0.0);
    long n = 0;
    auto take_row = [&](int y, int x0) {
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < c; ++ch) fill[static_cast<size_t>(ch)] += p_hat.at(y, x0 + x, ch);
      n += p;
    };
    auto take_col = [&](int x, int y0) {
      for (int y = 0; y < p; ++y)
        for (int ch = 0; ch < c; ++ch) fill[static_cast<size_t>(ch)] += p_hat.at(y0 + y, x, ch);
      n += p;
    };
    auto unmasked = [&](int rr, int ccc) {
      return rr >= 0 && rr < grid.rows && ccc >= 0 && ccc < grid.cols &&
             !plan.masked[static_cast<size_t>(rr * grid.cols + ccc)];
    };
    if (unmasked(r - 1, cc)) take_row(py - 1, px);      // bottom row of the patch above
    if (unmasked(r + 1, cc)) take_row(py + p, px);      // top row of the patch below
    if (unmasked(r, cc - 1)) take_col(px - 1, py);      // right column of the left patch
    if (unmasked(r, cc + 1)) take_col(px + p, py);      // left column of the right patch

    if (n > 0)
      for (auto& v : fill) v /= static_cast<double>(n);
    else
      fill = global;

    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < c; ++ch)
          out.at(py + y, px + x, ch) = static_cast<float>(fill[static_cast<size_t>(ch)]);
  }
  return out;
}

}  // namespace semlink::masking

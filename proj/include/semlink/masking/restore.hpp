#pragma once

#include "semlink/masking/mask_plan.hpp"

namespace semlink::masking {

// Background restoration stage: fills masked patches of the decoded image.
// Pluggable so an external learned model can be substituted.
class Restorer {
 public:
  virtual ~Restorer() = default;
  virtual vision::ImageTensor restore(const vision::ImageTensor& p_hat,
                                      const MaskPlan& plan) const = 0;
};

// Deterministic baseline: each masked patch is filled with the mean color of
// the border pixels its unmasked 4-neighbors expose along the shared edges;
// patches with no unmasked neighbor fall back to the global unmasked mean.
// Unmasked pixels are copied verbatim. Rejects an all-masked plan.
class NeighborMeanRestorer final : public Restorer {
 public:
  vision::ImageTensor restore(const vision::ImageTensor& p_hat,
                              const MaskPlan& plan) const override;
};

}  // namespace semlink::masking

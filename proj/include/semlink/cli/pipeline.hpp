#pragma once

#include <memory>
#include <optional>

#include "semlink/cli/dataset.hpp"
#include "semlink/codec/model.hpp"
#include "semlink/detect/score.hpp"
#include "semlink/emu/client.hpp"
#include "semlink/masking/mr_policy.hpp"
#include "semlink/masking/restore.hpp"
#include "semlink/phy/link.hpp"

namespace semlink::cli {

// Level-vector transport: the local OFDM chain, or the same chain with the
// time-domain samples detoured through the UDP channel service.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::vector<double> transmit(const std::vector<double>& levels,
                                       const phy::LinkConfig& link, uint64_t seed) = 0;
};

class LocalTransport final : public Transport {
 public:
  std::vector<double> transmit(const std::vector<double>& levels, const phy::LinkConfig& link,
                               uint64_t seed) override {
    return phy::transmit_link(levels, link, seed);
  }
};

class EmulatorTransport final : public Transport {
 public:
  EmulatorTransport(const std::string& host, uint16_t port);
  std::vector<double> transmit(const std::vector<double>& levels, const phy::LinkConfig& link,
                               uint64_t seed) override;

 private:
  emu::EmuClient client_;
  std::optional<emu::EmuConfig> active_;
};

struct EvalRecord {
  double mr = 0;
  double psnr_db = 0;
  double ssim = 0;
  double cs = 0;
  double psnr_cs = 0;
  double ssim_cs = 0;
};

// Full single-image pass: importance order + plan, mask, encode, transmit,
// dequantize, decode, restore, metrics. `policy` picks the MR from
// (link.snr_db, object area); a negative `forced_mr` defers to the policy.
// Predictions for the confidence score come from `detector_cmd` when set,
// otherwise the image's own annotations stand in.
EvalRecord run_link_once(const EvalImage& ei, codec::Codec& codec,
                         const masking::MrPolicy* policy, double forced_mr,
                         const phy::LinkConfig& link, Transport& transport,
                         const std::string& detector_cmd, uint64_t seed,
                         vision::ImageTensor* restored_out = nullptr);

}  // namespace semlink::cli

#include "semlink/cli/pipeline.hpp"

#include <cmath>

#include "semlink/common/rng.hpp"
#include "semlink/vision/metrics.hpp"

namespace semlink::cli {

EmulatorTransport::EmulatorTransport(const std::string& host, uint16_t port)
    : client_(host, port) {}

std::vector<double> EmulatorTransport::transmit(const std::vector<double>& levels,
                                                const phy::LinkConfig& link, uint64_t seed) {
  emu::EmuConfig want;
  want.channel = link.channel;
  want.snr_db = static_cast<float>(link.snr_db);
  want.seed = Rng::derive(link.seed, seed);
  want.taps = static_cast<uint8_t>(link.taps);
  if (!active_ || active_->channel != want.channel || active_->snr_db != want.snr_db ||
      active_->seed != want.seed || active_->taps != want.taps) {
    client_.configure(want);
    active_ = want;
  }
  phy::ChannelHop hop = [this](const std::vector<phy::cplx>& time) {
    std::vector<std::complex<float>> tx(time.size());
    for (size_t i = 0; i < time.size(); ++i)
      tx[i] = {static_cast<float>(time[i].real()), static_cast<float>(time[i].imag())};
    auto rx = client_.send_frame(tx);
    std::vector<phy::cplx> out(rx.size());
    for (size_t i = 0; i < rx.size(); ++i) out[i] = {rx[i].real(), rx[i].imag()};
    return out;
  };
  return phy::transmit_link(levels, link, seed, &hop);
}

EvalRecord run_link_once(const EvalImage& ei, codec::Codec& codec,
                         const masking::MrPolicy* policy, double forced_mr,
                         const phy::LinkConfig& link, Transport& transport,
                         const std::string& detector_cmd, uint64_t seed,
                         vision::ImageTensor* restored_out) {
  const auto& cfg = codec.config();
  vision::PatchGrid grid(cfg.height, cfg.width, cfg.patch);

  double mr = forced_mr >= 0 ? forced_mr
                             : (policy ? policy->eval(link.snr_db, ei.object_area_frac) : 0.0);
  auto plan = masking::build_mask_plan(ei.order, mr, ei.dets, grid, cfg.height, cfg.width,
                                       cfg.channels);
  auto p = masking::apply_mask(ei.image, plan);

  auto levels = codec.encode(p, plan);
  auto soft = transport.transmit(levels, link, seed);
  auto latent = codec::dequantize(soft);
  auto p_hat = codec.decode(latent, plan);

  masking::NeighborMeanRestorer restorer;
  auto s_hat = restorer.restore(p_hat, plan);

  EvalRecord rec;
  rec.mr = mr;
  rec.psnr_db = vision::psnr(ei.image, s_hat);
  rec.ssim = vision::ssim(ei.image, s_hat);

  detect::DetectionSet pred;
  if (!detector_cmd.empty()) {
    auto tmp = std::filesystem::temp_directory_path() /
               ("semlink_eval_" + std::to_string(seed) + ".ppm");
    vision::save_image(s_hat, tmp);
    pred = detect::run_external_detector(detector_cmd, tmp, cfg.width, cfg.height);
    std::filesystem::remove(tmp);
  } else {
    pred = ei.dets;  // annotation stand-in when no detector is wired up
  }
  rec.cs = detect::confidence_score(ei.dets, pred).cs;

  auto combined = detect::combined_metrics(rec.psnr_db, rec.ssim, rec.cs);
  rec.psnr_cs = combined.psnr_cs;
  rec.ssim_cs = combined.ssim_cs;
  if (restored_out) *restored_out = std::move(s_hat);
  return rec;
}

}  // namespace semlink::cli

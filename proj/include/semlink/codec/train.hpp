#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "semlink/codec/model.hpp"
#include "semlink/detect/detections.hpp"
#include "semlink/phy/link.hpp"

namespace semlink::codec {

// One dataset entry with its precomputed masking inputs. Plans are derived
// per (sample, MR) during training.
struct TrainSample {
  vision::ImageTensor image;
  std::vector<int> kp_counts;
  detect::DetectionSet dets;
};

struct TrainOptions {
  int epochs = 20;
  int batch_size = 8;
  double lr = 2e-4;
  phy::ChannelModel channel = phy::ChannelModel::kAwgn;  // stages 2/3
  double snr_db = 10.0;
  bool snr_uniform = false;  // draw per-sample SNR uniformly from [-5, 15]
  int warmup_epochs = 0;     // clip-surrogate quantizer for the first N epochs
  uint64_t seed = 1;
  std::filesystem::path checkpoint_dir;  // per-epoch checkpoints when non-empty
  std::ostream* log = nullptr;           // CSV: epoch,stage,channel,snr_db,loss,psnr
};

struct TrainResult {
  CodecParams params;
  std::vector<double> epoch_loss;
  bool diverged = false;  // aborted on a non-finite loss; params hold the last good state
};

// Stage 1: ViT + compression over a noiseless link (channel stack bypassed),
// pixel MSE. Stage 2: channel stacks only, masked MSE under the configured
// channel; everything else is frozen. Stage 3 (finetune): all parameters.
TrainResult train_stage1(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                         const TrainOptions& opt);
TrainResult train_stage2(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                         const CodecParams& stage1, const TrainOptions& opt);
TrainResult finetune(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                     const CodecParams& stage2, const TrainOptions& opt);

// CNN twin of a ViT config at the same dims and symbol budget (the
// quantizer and channel stack shape are shared).
CodecConfig cnn_only_variant(const CodecConfig& vit_cfg);

// Mean Eq.(5) loss of `params` over a sample set through the training-time
// channel surrogate at a fixed SNR (held-out evaluation).
double eval_masked_loss(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                        const CodecParams& params, phy::ChannelModel channel, double snr_db,
                        uint64_t seed);

// Per-sample surrogate constants (exposed for the gradient-check suite).
void set_channel_surrogate(CodecNet<float>& net, phy::ChannelModel channel, double snr_db,
                           uint64_t seed);
void set_channel_surrogate(CodecNet<double>& net, phy::ChannelModel channel, double snr_db,
                           uint64_t seed);

}  // namespace semlink::codec

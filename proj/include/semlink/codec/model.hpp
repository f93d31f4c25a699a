#pragma once

#include <map>
#include <string>
#include <vector>

#include "semlink/codec/config.hpp"
#include "semlink/masking/mask_plan.hpp"
#include "semlink/nn/checkpoint.hpp"
#include "semlink/nn/graph.hpp"
#include "semlink/vision/image.hpp"

namespace semlink::codec {

// Canonical parameter store; names are stable across graph builds so stage
// checkpoints interchange freely. "enc.chan."/"dec.chan." prefixes form the
// channel-coding group, everything else is the core (ViT + compression).
struct CodecParams {
  std::map<std::string, nn::TensorF> values;

  static bool in_channel_group(const std::string& name);
  void save(const std::filesystem::path& path) const { nn::save_checkpoint(path, values); }
  static CodecParams load(const std::filesystem::path& path) { return {nn::load_checkpoint(path)}; }
  uint64_t content_hash() const;
};

CodecParams init_codec_params(const CodecConfig& cfg, uint64_t seed);

enum class GraphMode : uint8_t { kEncoder, kDecoder, kEndToEnd };

struct BuildOptions {
  GraphMode mode = GraphMode::kEndToEnd;
  bool with_channel_cnn = true;  // stage 1 trains with the stack bypassed
  nn::QuantizeMode qmode = nn::QuantizeMode::kHard;
};

// One built tape plus the node handles the runners need. Values flow in and
// out by parameter name.
template <typename T>
struct CodecNet {
  CodecConfig cfg;
  BuildOptions opts;
  nn::Graph<T> g;

  nn::NodeId in_image = -1;      // vit: [N_T, P*P*C] patches; cnn: [C,H,W]
  nn::NodeId latent_mask = -1;   // [lpp, gh, gw] 0/1 constant
  nn::NodeId enc_levels = -1;    // quantizer output [n_levels]
  nn::NodeId fade = -1;          // surrogate channel constants (end-to-end)
  nn::NodeId noise = -1;
  nn::NodeId dec_in = -1;        // decoder-mode input: soft levels [n_levels]
  nn::NodeId dec_out = -1;       // clamped reconstruction (patches or CHW)
  nn::NodeId target = -1;
  nn::NodeId pix_mask = -1;
  nn::NodeId loss_mse = -1;
  nn::NodeId loss_masked = -1;

  std::map<std::string, nn::NodeId> param_nodes;

  void load(const CodecParams& p);      // copies values for names present in the graph
  CodecParams snapshot() const;
  std::vector<nn::NodeId> param_ids(bool channel_group_only = false,
                                    bool core_group_only = false) const;
};

template <typename T>
CodecNet<T> build_codec_net(const CodecConfig& cfg, const BuildOptions& opts, uint64_t init_seed);

extern template struct CodecNet<float>;
extern template struct CodecNet<double>;
extern template CodecNet<float> build_codec_net<float>(const CodecConfig&, const BuildOptions&,
                                                       uint64_t);
extern template CodecNet<double> build_codec_net<double>(const CodecConfig&, const BuildOptions&,
                                                         uint64_t);

// layout helpers shared by runners
std::vector<float> image_to_rows(const vision::ImageTensor& img, const CodecConfig& cfg);
vision::ImageTensor rows_to_image(const std::vector<float>& rows, const CodecConfig& cfg);
std::vector<float> latent_mask_values(const masking::MaskPlan& plan, const CodecConfig& cfg);

// soft received values back to the decoder's latent scale (inverse of the
// 3*tanh range; no re-snapping to levels)
std::vector<double> dequantize(const std::vector<double>& soft_levels);

// Inference facade: cached encoder/decoder tapes over float32 parameters.
class Codec {
 public:
  explicit Codec(const CodecConfig& cfg);

  void set_params(const CodecParams& p);
  const CodecConfig& config() const { return cfg_; }

  // p must already be masked per plan; returns 2N levels in {-3,-1,1,3}
  std::vector<double> encode(const vision::ImageTensor& p, const masking::MaskPlan& plan);

  // latent in, clamped [0,1] image out
  vision::ImageTensor decode(const std::vector<double>& latent, const masking::MaskPlan& plan);

 private:
  CodecConfig cfg_;
  CodecNet<float> enc_;
  CodecNet<float> dec_;
};

}  // namespace semlink::codec

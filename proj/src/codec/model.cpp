#include "semlink/codec/model.hpp"

#include <cmath>
#include <stdexcept>

#include "semlink/common/rng.hpp"
#include "semlink/vision/patch.hpp"

namespace semlink::codec {

using nn::Graph;
using nn::NodeId;
using nn::Tensor;

bool CodecParams::in_channel_group(const std::string& name) {
  return name.rfind("enc.chan.", 0) == 0 || name.rfind("dec.chan.", 0) == 0;
}

uint64_t CodecParams::content_hash() const {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, t] : values) {
    mix(name.data(), name.size());
    mix(t.data.data(), t.data.size() * sizeof(float));
  }
  return h;
}

namespace {

const double kSqrt10 = std::sqrt(10.0);

template <typename T>
class Builder {
 public:
  Builder(Graph<T>& g, const CodecConfig& cfg, uint64_t seed,
          std::map<std::string, NodeId>& params)
      : g_(g), cfg_(cfg), rng_(seed), params_(params) {}

  NodeId param(const std::string& name, Tensor<T> init) {
    NodeId id = g_.param(std::move(init), name);
    params_[name] = id;
    return id;
  }

  Tensor<T> xavier(int fan_in, int fan_out, std::vector<int> shape) {
    double std = std::sqrt(2.0 / (fan_in + fan_out));
    return Tensor<T>::randn(std::move(shape), rng_, std);
  }

  Tensor<T> he(int fan_in, std::vector<int> shape) {
    return Tensor<T>::randn(std::move(shape), rng_, std::sqrt(2.0 / fan_in));
  }

  NodeId linear(NodeId x, int in, int out, const std::string& name, double bias_fill = 0.0) {
    NodeId w = param(name + ".w", xavier(in, out, {in, out}));
    NodeId b = param(name + ".b", Tensor<T>::full({out}, static_cast<T>(bias_fill)));
    return g_.add_bias(g_.matmul(x, w), b);
  }

  NodeId layer_norm(NodeId x, int dim, const std::string& name) {
    NodeId gain = param(name + ".g", Tensor<T>::full({dim}, T(1)));
    NodeId bias = param(name + ".b", Tensor<T>::zeros({dim}));
    return g_.layer_norm(x, gain, bias);
  }

  // residual branches enter through zero-initialized elementwise gates, so
  // the trunk starts as the identity and the blocks fade in as they help;
  // this keeps the short training runs well-conditioned
  NodeId vit_block(NodeId x, int seq, const VitSpec& v, const std::string& prefix) {
    const int e = v.embed, heads = v.heads, dh = e / heads;
    NodeId h = layer_norm(x, e, prefix + ".ln1");
    auto head_split = [&](NodeId m) {
      return g_.permute3(g_.reshape(m, {seq, heads, dh}), {1, 0, 2});
    };
    NodeId q = head_split(linear(h, e, e, prefix + ".attn.q"));
    NodeId k = head_split(linear(h, e, e, prefix + ".attn.k"));
    NodeId vv = head_split(linear(h, e, e, prefix + ".attn.v"));
    NodeId att = g_.softmax(g_.scale(g_.batch_matmul(q, k, true), 1.0 / std::sqrt(double(dh))));
    NodeId ctx = g_.batch_matmul(att, vv);
    NodeId merged = g_.reshape(g_.permute3(ctx, {1, 0, 2}), {seq, e});
    NodeId attn_out = linear(merged, e, e, prefix + ".attn.o");
    NodeId gate1 = param(prefix + ".attn.gate", Tensor<T>::zeros({seq, e}));
    x = g_.add(x, g_.mul(attn_out, gate1));

    NodeId h2 = layer_norm(x, e, prefix + ".ln2");
    int hidden = e * v.mlp_ratio;
    NodeId m1 = g_.gelu(linear(h2, e, hidden, prefix + ".mlp.1"));
    NodeId m2 = linear(m1, hidden, e, prefix + ".mlp.2");
    NodeId gate2 = param(prefix + ".mlp.gate", Tensor<T>::zeros({seq, e}));
    return g_.add(x, g_.mul(m2, gate2));
  }

  NodeId vit_stack(NodeId x, int seq, const VitSpec& v, const std::string& prefix) {
    for (int b = 0; b < v.blocks; ++b)
      x = vit_block(x, seq, v, prefix + ".blk" + std::to_string(b));
    return layer_norm(x, v.embed, prefix + ".ln");
  }

  // conv stack with ReLU between layers; zero_last makes the final layer an
  // exact zero map (residual stacks start as identity)
  NodeId conv_stack(NodeId x, const std::vector<ConvSpec>& specs, const std::string& prefix,
                    bool zero_last, double last_scale = 1.0) {
    for (size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      bool last = i + 1 == specs.size();
      std::string name = prefix + "." + std::to_string(i);
      Tensor<T> wv = (last && zero_last)
                         ? Tensor<T>::zeros({s.out_ch, s.in_ch, s.kernel, s.kernel})
                         : he(s.in_ch * s.kernel * s.kernel,
                              {s.out_ch, s.in_ch, s.kernel, s.kernel});
      if (last && !zero_last && last_scale != 1.0)
        for (auto& v : wv.data) v = static_cast<T>(v * last_scale);
      NodeId w = param(name + ".w", std::move(wv));
      NodeId b = param(name + ".b", Tensor<T>::zeros({s.out_ch}));
      x = g_.conv2d(x, w, b, s.stride, conv_pad(s));
      if (!last) x = g_.relu(x);
    }
    return x;
  }

  // mirror of a downsampling stack: k1 layers stay 1x1 convs, strided layers
  // become transposed convs; walked in reverse with channels swapped
  NodeId conv_stack_mirror(NodeId x, const std::vector<ConvSpec>& specs,
                           const std::string& prefix) {
    int idx = 0;
    for (size_t i = specs.size(); i-- > 0; ++idx) {
      const auto& s = specs[i];
      bool last = (i == 0);
      std::string name = prefix + "." + std::to_string(idx);
      if (s.kernel == 1 && s.stride == 1) {
        NodeId w = param(name + ".w", he(s.out_ch, {s.in_ch, s.out_ch, 1, 1}));
        NodeId b = param(name + ".b", Tensor<T>::zeros({s.in_ch}));
        x = g_.conv2d(x, w, b, 1, 0);
      } else {
        NodeId w = param(name + ".w", he(s.out_ch * s.kernel * s.kernel,
                                         {s.out_ch, s.in_ch, s.kernel, s.kernel}));
        NodeId b = param(name + ".b", Tensor<T>::zeros({s.in_ch}));
        x = g_.conv2d_transpose(x, w, b, s.stride, conv_pad(s));
      }
      if (!last) x = g_.relu(x);
    }
    return x;
  }

  NodeId clamp01(NodeId x) {
    int d = g_.value(x).shape.back();
    NodeId minus_one = g_.constant(Tensor<T>::full({d}, T(-1)), "clamp.shift");
    NodeId lo = g_.relu(x);
    NodeId hi = g_.relu(g_.add_bias(x, minus_one));
    return g_.add(lo, g_.scale(hi, -1.0));
  }

  NodeId seq_to_grid(NodeId x, int seq, int ch) {
    NodeId t = g_.reshape(x, {seq, ch, 1});
    t = g_.permute3(t, {1, 0, 2});
    return g_.reshape(t, {ch, cfg_.grid_rows(), cfg_.grid_cols()});
  }

  NodeId grid_to_seq(NodeId x, int seq, int ch) {
    NodeId t = g_.reshape(x, {ch, seq, 1});
    t = g_.permute3(t, {1, 0, 2});
    return g_.reshape(t, {seq, ch});
  }

  Graph<T>& g_;
  const CodecConfig& cfg_;
  Rng rng_;
  std::map<std::string, NodeId>& params_;
};

}  // namespace

template <typename T>
void CodecNet<T>::load(const CodecParams& p) {
  for (const auto& [name, id] : param_nodes) {
    auto it = p.values.find(name);
    if (it == p.values.end()) continue;  // absent groups keep their init
    if constexpr (std::is_same_v<T, float>) {
      g.set_value(id, it->second);
    } else {
      g.set_value(id, it->second.template cast<T>());
    }
  }
}

template <typename T>
CodecParams CodecNet<T>::snapshot() const {
  CodecParams out;
  for (const auto& [name, id] : param_nodes) {
    if constexpr (std::is_same_v<T, float>) {
      out.values.emplace(name, g.value(id));
    } else {
      out.values.emplace(name, g.value(id).template cast<float>());
    }
  }
  return out;
}

template <typename T>
std::vector<NodeId> CodecNet<T>::param_ids(bool channel_group_only, bool core_group_only) const {
  std::vector<NodeId> out;
  for (const auto& [name, id] : param_nodes) {
    bool chan = CodecParams::in_channel_group(name);
    if (channel_group_only && !chan) continue;
    if (core_group_only && chan) continue;
    out.push_back(id);
  }
  return out;
}

template <typename T>
CodecNet<T> build_codec_net(const CodecConfig& cfg, const BuildOptions& opts,
                            uint64_t init_seed) {
  cfg.validate();
  CodecNet<T> net;
  net.cfg = cfg;
  net.opts = opts;
  Builder<T> b(net.g, cfg, init_seed, net.param_nodes);

  const int seq = cfg.n_patches();
  const int ppc = cfg.patch_values();
  const int lpp = cfg.levels_per_patch();
  const int gh = cfg.grid_rows(), gw = cfg.grid_cols();
  const bool vit = cfg.variant == CodecVariant::kVit;

  NodeId latent = -1;  // encoder output feeding the channel/decoder

  if (opts.mode != GraphMode::kDecoder) {
    // ---------------- encoder ----------------
    NodeId grid;
    if (vit) {
      net.in_image = net.g.input({seq, ppc}, "in.patches");
      NodeId x = b.linear(net.in_image, ppc, cfg.vit.embed, "enc.embed");
      NodeId pos = b.param("enc.pos", Tensor<T>::randn({seq, cfg.vit.embed}, b.rng_, 0.02));
      x = net.g.add(x, pos);
      x = b.vit_stack(x, seq, cfg.vit, "enc.vit");
      grid = b.seq_to_grid(x, seq, cfg.vit.embed);
      grid = b.conv_stack(grid, cfg.compression, "enc.comp", false, 0.3);
      // direct per-patch pixel->code branch: carries the patch appearance
      // straight into the code, the transformer path adds context
      NodeId skip_w = b.param("enc.skip.w", b.xavier(ppc, lpp, {ppc, lpp}));
      NodeId skip = b.seq_to_grid(net.g.matmul(net.in_image, skip_w), seq, lpp);
      grid = net.g.add(grid, skip);
    } else {
      net.in_image = net.g.input({cfg.channels, cfg.height, cfg.width}, "in.chw");
      grid = b.conv_stack(net.in_image, cfg.compression, "enc.comp", false);
    }
    // zero the masked-patch slots, then let the channel stack spread
    // information across all slots (masked slots carry redundancy)
    net.latent_mask = net.g.constant(Tensor<T>::full({lpp, gh, gw}, T(1)), "latent.mask");
    grid = net.g.mul(grid, net.latent_mask);
    if (opts.with_channel_cnn) {
      NodeId res = b.conv_stack(grid, cfg.channel_coding, "enc.chan", true);
      grid = net.g.add(grid, res);
    }
    NodeId flat = net.g.reshape(grid, {cfg.n_levels()});
    NodeId squashed = net.g.scale(net.g.tanh(flat), 3.0);
    net.enc_levels = net.g.quantize_ste(squashed, opts.qmode);
    latent = net.enc_levels;
  }

  if (opts.mode == GraphMode::kEndToEnd) {
    // training-time channel surrogate: per-symbol complex fade + AWGN with
    // the estimate folded into frozen constants (h/h_hat, n/h_hat)
    net.fade = net.g.constant(Tensor<T>::zeros({cfg.n_levels()}), "chan.fade");
    net.noise = net.g.constant(Tensor<T>::zeros({cfg.n_levels()}), "chan.noise");
    NodeId s = net.g.scale(latent, 1.0 / kSqrt10);
    NodeId faded = net.g.complex_mul_const(s, net.fade);
    NodeId noisy = net.g.add(faded, net.noise);
    NodeId soft = net.g.scale(noisy, kSqrt10);
    latent = net.g.scale(soft, 1.0 / 3.0);  // dequantize
  } else if (opts.mode == GraphMode::kDecoder) {
    net.dec_in = net.g.input({cfg.n_levels()}, "in.latent");
    latent = net.dec_in;
  } else {
    return net;  // encoder-only tape ends at the quantizer
  }

  // ---------------- decoder ----------------
  {
    NodeId grid = net.g.reshape(latent, {lpp, gh, gw});
    if (opts.with_channel_cnn) {
      NodeId res = b.conv_stack(grid, cfg.channel_coding, "dec.chan", true);
      grid = net.g.add(grid, res);
    }
    NodeId out;
    if (vit) {
      NodeId latent_seq = b.grid_to_seq(grid, seq, lpp);
      grid = b.conv_stack_mirror(grid, cfg.compression, "dec.comp");
      NodeId x = b.grid_to_seq(grid, seq, cfg.vit.embed);
      NodeId pos = b.param("dec.pos", Tensor<T>::randn({seq, cfg.vit.embed}, b.rng_, 0.02));
      x = net.g.add(x, pos);
      x = b.vit_stack(x, seq, cfg.vit, "dec.vit");
      out = b.linear(x, cfg.vit.embed, ppc, "dec.out", 0.5);
      NodeId skip_w = b.param("dec.skip.w", b.xavier(lpp, ppc, {lpp, ppc}));
      out = net.g.add(out, net.g.matmul(latent_seq, skip_w));
    } else {
      out = b.conv_stack_mirror(grid, cfg.compression, "dec.comp");
    }
    net.dec_out = b.clamp01(out);
  }

  if (opts.mode == GraphMode::kEndToEnd) {
    const auto& out_shape = net.g.value(net.dec_out).shape;
    net.target = net.g.input(out_shape, "target");
    net.pix_mask = net.g.input(out_shape, "pix.mask");
    net.loss_mse = net.g.mse_loss(net.dec_out, net.target);
    net.loss_masked =
        net.g.masked_mse_loss(net.dec_out, net.target, net.pix_mask, seq, seq);
  }
  return net;
}

CodecParams init_codec_params(const CodecConfig& cfg, uint64_t seed) {
  BuildOptions opts;
  opts.mode = GraphMode::kEndToEnd;
  opts.with_channel_cnn = true;
  auto net = build_codec_net<float>(cfg, opts, seed);
  return net.snapshot();
}

std::vector<float> image_to_rows(const vision::ImageTensor& img, const CodecConfig& cfg) {
  if (img.height != cfg.height || img.width != cfg.width || img.channels != cfg.channels)
    throw std::invalid_argument("codec: image does not match the configured dims");
  std::vector<float> rows;
  if (cfg.variant == CodecVariant::kVit) {
    auto patches = vision::patchify(img, cfg.patch);
    rows.reserve(static_cast<size_t>(cfg.n_patches()) * cfg.patch_values());
    for (const auto& p : patches) rows.insert(rows.end(), p.begin(), p.end());
  } else {
    rows.resize(img.numel());
    for (int c = 0; c < cfg.channels; ++c)
      for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x)
          rows[(static_cast<size_t>(c) * cfg.height + y) * cfg.width + x] = img.at(y, x, c);
  }
  return rows;
}

vision::ImageTensor rows_to_image(const std::vector<float>& rows, const CodecConfig& cfg) {
  vision::ImageTensor img(cfg.height, cfg.width, cfg.channels);
  if (rows.size() != img.numel()) throw std::invalid_argument("codec: row buffer size mismatch");
  if (cfg.variant == CodecVariant::kVit) {
    const size_t ppc = static_cast<size_t>(cfg.patch_values());
    std::vector<std::vector<float>> patches(static_cast<size_t>(cfg.n_patches()));
    for (int k = 0; k < cfg.n_patches(); ++k)
      patches[static_cast<size_t>(k)] =
          std::vector<float>(rows.begin() + k * ppc, rows.begin() + (k + 1) * ppc);
    img = vision::unpatchify(patches, cfg.height, cfg.width, cfg.channels, cfg.patch);
  } else {
    for (int c = 0; c < cfg.channels; ++c)
      for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x)
          img.at(y, x, c) = rows[(static_cast<size_t>(c) * cfg.height + y) * cfg.width + x];
  }
  return img;
}

std::vector<float> latent_mask_values(const masking::MaskPlan& plan, const CodecConfig& cfg) {
  if (plan.n_total != cfg.n_patches())
    throw std::invalid_argument("codec: plan patch count does not match config");
  const int lpp = cfg.levels_per_patch();
  std::vector<float> out(static_cast<size_t>(lpp) * cfg.n_patches());
  for (int ch = 0; ch < lpp; ++ch)
    for (int k = 0; k < cfg.n_patches(); ++k)
      out[static_cast<size_t>(ch) * cfg.n_patches() + k] =
          plan.masked[static_cast<size_t>(k)] ? 0.0f : 1.0f;
  return out;
}

std::vector<double> dequantize(const std::vector<double>& soft_levels) {
  std::vector<double> out(soft_levels.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = soft_levels[i] / 3.0;
  return out;
}

Codec::Codec(const CodecConfig& cfg)
    : cfg_(cfg),
      enc_(build_codec_net<float>(cfg, {GraphMode::kEncoder, true, nn::QuantizeMode::kHard}, 1)),
      dec_(build_codec_net<float>(cfg, {GraphMode::kDecoder, true, nn::QuantizeMode::kHard}, 1)) {}

void Codec::set_params(const CodecParams& p) {
  enc_.load(p);
  dec_.load(p);
}

std::vector<double> Codec::encode(const vision::ImageTensor& p, const masking::MaskPlan& plan) {
  enc_.g.set_value(enc_.in_image, image_to_rows(p, cfg_));
  enc_.g.set_value(enc_.latent_mask, latent_mask_values(plan, cfg_));
  enc_.g.forward(enc_.enc_levels);
  const auto& lv = enc_.g.value(enc_.enc_levels);
  return std::vector<double>(lv.data.begin(), lv.data.end());
}

vision::ImageTensor Codec::decode(const std::vector<double>& latent,
                                  const masking::MaskPlan& plan) {
  (void)plan;  // both ends know the plan; this decoder does not condition on it
  if (latent.size() != static_cast<size_t>(cfg_.n_levels()))
    throw std::invalid_argument("decode: latent length " + std::to_string(latent.size()) +
                                " != " + std::to_string(cfg_.n_levels()));
  std::vector<float> lf(latent.begin(), latent.end());
  dec_.g.set_value(dec_.dec_in, lf);
  dec_.g.forward(dec_.dec_out);
  return rows_to_image(dec_.g.value(dec_.dec_out).data, cfg_);
}

template struct CodecNet<float>;
template struct CodecNet<double>;
template CodecNet<float> build_codec_net<float>(const CodecConfig&, const BuildOptions&, uint64_t);
template CodecNet<double> build_codec_net<double>(const CodecConfig&, const BuildOptions&,
                                                  uint64_t);

}  // namespace semlink::codec

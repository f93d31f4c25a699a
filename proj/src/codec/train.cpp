#include "semlink/codec/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "semlink/common/rng.hpp"
#include "semlink/masking/mask_plan.hpp"
#include "semlink/nn/adam.hpp"

namespace semlink::codec {

using masking::MaskPlan;
using nn::AdamState;
using nn::NodeId;

namespace {

template <typename T>
void fill_surrogate(CodecNet<T>& net, phy::ChannelModel channel, double snr_db, uint64_t seed) {
  const int n_sym = net.cfg.n_symbols();
  std::vector<T> fade(static_cast<size_t>(2 * n_sym));
  std::vector<T> noise(static_cast<size_t>(2 * n_sym));
  Rng rng(seed);
  const bool fading = channel == phy::ChannelModel::kRayleighFlat ||
                      channel == phy::ChannelModel::kRayleighMultipath;
  const bool noisy = channel != phy::ChannelModel::kNoiseless && std::isfinite(snr_db);
  const double n0 = noisy ? std::pow(10.0, -snr_db / 10.0) : 0.0;
  for (int i = 0; i < n_sym; ++i) {
    std::complex<double> h = fading ? rng.cgaussian(1.0) : std::complex<double>(1, 0);
    std::complex<double> n = noisy ? rng.cgaussian(n0) : std::complex<double>(0, 0);
    std::complex<double> h_hat = h;
    if (noisy) h_hat += rng.cgaussian(0.5 * n0);  // LS-grade estimate, frozen
    std::complex<double> heff, neff;
    if (std::abs(h_hat) < 1e-6) {  // erased symbol, mirroring ZF behaviour
      heff = 0;
      neff = 0;
    } else {
      heff = h / h_hat;
      neff = n / h_hat;
    }
    fade[static_cast<size_t>(2 * i)] = static_cast<T>(heff.real());
    fade[static_cast<size_t>(2 * i + 1)] = static_cast<T>(heff.imag());
    noise[static_cast<size_t>(2 * i)] = static_cast<T>(neff.real());
    noise[static_cast<size_t>(2 * i + 1)] = static_cast<T>(neff.imag());
  }
  net.g.set_value(net.fade, fade);
  net.g.set_value(net.noise, noise);
}

struct PlanCache {
  const CodecConfig& cfg;
  vision::PatchGrid grid;
  std::map<std::pair<int, int>, MaskPlan> plans;  // (sample idx, mr decile)

  explicit PlanCache(const CodecConfig& c)
      : cfg(c), grid(c.height, c.width, c.patch) {}

  const MaskPlan& get(const std::vector<TrainSample>& data, int idx, int mr_decile) {
    auto key = std::make_pair(idx, mr_decile);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    const auto& s = data[static_cast<size_t>(idx)];
    auto order = masking::importance_order(s.dets, s.kp_counts, grid);
    double mr = std::min(0.1 * mr_decile, 0.7);
    auto plan = masking::build_mask_plan(order, mr, s.dets, grid, cfg.height,
                                         cfg.width, cfg.channels);
    return plans.emplace(key, std::move(plan)).first->second;
  }
};

TrainResult run_stage(int stage, const std::vector<TrainSample>& data, const CodecConfig& cfg,
                      const CodecParams* init, const TrainOptions& opt) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  cfg.validate();

  BuildOptions bopt;
  bopt.mode = GraphMode::kEndToEnd;
  bopt.with_channel_cnn = stage >= 2;
  bopt.qmode = nn::QuantizeMode::kHard;
  auto net = build_codec_net<float>(cfg, bopt, Rng::derive(opt.seed, 0x1417));

  // start from the canonical full init so checkpoints always carry every group
  CodecParams start = init_codec_params(cfg, Rng::derive(opt.seed, 0x1417));
  if (init)
    for (const auto& [name, t] : init->values) start.values[name] = t;
  net.load(start);

  std::vector<NodeId> step_params;
  if (stage == 2)
    step_params = net.param_ids(/*channel_group_only=*/true);
  else
    step_params = net.param_ids();

  const NodeId loss_node = stage == 1 ? net.loss_mse : net.loss_masked;
  const phy::ChannelModel channel =
      stage == 1 ? phy::ChannelModel::kNoiseless : opt.channel;

  AdamState<float> adam;
  adam.lr = opt.lr;

  PlanCache cache(cfg);
  TrainResult result;
  CodecParams last_good = start;

  std::vector<int> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);

  uint64_t draw = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    net.g.set_quantize_mode(net.enc_levels, epoch < opt.warmup_epochs
                                                ? nn::QuantizeMode::kTransparent
                                                : nn::QuantizeMode::kHard);
    Rng shuffle_rng(Rng::derive(opt.seed, 0xe000 + static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_int(
                                  0, static_cast<int>(i) - 1))]);

    double epoch_loss = 0, epoch_mse = 0;
    int steps = 0;
    bool bad = false;
    for (size_t pos = 0; pos < order.size() && !bad; pos += static_cast<size_t>(opt.batch_size)) {
      size_t take = std::min(static_cast<size_t>(opt.batch_size), order.size() - pos);
      net.g.zero_param_grads();
      double batch_loss = 0, batch_mse = 0;
      for (size_t bi = 0; bi < take; ++bi) {
        int idx = order[pos + bi];
        Rng srng(Rng::derive(opt.seed, 0xd000 + draw));
        ++draw;
        int mr_decile = srng.uniform_int(0, 7);
        const MaskPlan& plan = cache.get(data, idx, mr_decile);
        auto p = masking::apply_mask(data[static_cast<size_t>(idx)].image, plan);

        net.g.set_value(net.in_image, image_to_rows(p, cfg));
        net.g.set_value(net.latent_mask, latent_mask_values(plan, cfg));
        net.g.set_value(net.target, image_to_rows(p, cfg));
        net.g.set_value(net.pix_mask, image_to_rows(plan.mask, cfg));
        net.g.set_masked_counts(net.loss_masked, plan.n_total, plan.n_unmasked);
        double snr = opt.snr_uniform ? srng.uniform(-5.0, 15.0) : opt.snr_db;
        fill_surrogate(net, channel, snr, Rng::derive(opt.seed, 0xc000 + draw));

        double l = net.g.forward(loss_node);
        net.g.forward(net.loss_masked);  // ensure both scalars are current
        batch_loss += l;
        batch_mse += net.g.value(net.loss_mse)[0];
        if (!std::isfinite(l)) {
          bad = true;
          break;
        }
        net.g.backward(loss_node);
      }
      if (bad) break;
      net.g.scale_param_grads(1.0f / static_cast<float>(take));
      try {
        adam_step(net.g, step_params, adam);
      } catch (const std::runtime_error&) {
        bad = true;
        break;
      }
      epoch_loss += batch_loss / static_cast<double>(take);
      epoch_mse += batch_mse / static_cast<double>(take);
      ++steps;
    }
    if (bad) {
      result.diverged = true;
      result.params = last_good;
      return result;
    }
    epoch_loss /= std::max(1, steps);
    epoch_mse /= std::max(1, steps);
    result.epoch_loss.push_back(epoch_loss);
    last_good = net.snapshot();
    // stage-1 snapshots lack the channel group; keep checkpoints complete
    for (const auto& [name, t] : start.values)
      if (!last_good.values.count(name)) last_good.values[name] = t;

    if (opt.log) {
      double psnr_db = epoch_mse > 0 ? 10.0 * std::log10(1.0 / epoch_mse) : 100.0;
      char snr_field[32];
      if (opt.snr_uniform)
        std::snprintf(snr_field, sizeof snr_field, "uniform");
      else
        std::snprintf(snr_field, sizeof snr_field, "%.1f", opt.snr_db);
      char row[160];
      std::snprintf(row, sizeof row, "%d,%d,%s,%s,%.6f,%.2f\n", epoch, stage,
                    phy::channel_name(channel), snr_field, epoch_loss, psnr_db);
      (*opt.log) << row;
      opt.log->flush();
    }
    if (!opt.checkpoint_dir.empty()) {
      std::filesystem::create_directories(opt.checkpoint_dir);
      last_good.save(opt.checkpoint_dir /
                     ("stage" + std::to_string(stage) + "_epoch" + std::to_string(epoch) +
                      ".slnn"));
    }
  }
  result.params = last_good;
  return result;
}

}  // namespace

void set_channel_surrogate(CodecNet<float>& net, phy::ChannelModel channel, double snr_db,
                           uint64_t seed) {
  fill_surrogate(net, channel, snr_db, seed);
}

void set_channel_surrogate(CodecNet<double>& net, phy::ChannelModel channel, double snr_db,
                           uint64_t seed) {
  fill_surrogate(net, channel, snr_db, seed);
}

TrainResult train_stage1(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                         const TrainOptions& opt) {
  return run_stage(1, data, cfg, nullptr, opt);
}

TrainResult train_stage2(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                         const CodecParams& stage1, const TrainOptions& opt) {
  return run_stage(2, data, cfg, &stage1, opt);
}

TrainResult finetune(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                     const CodecParams& stage2, const TrainOptions& opt) {
  return run_stage(3, data, cfg, &stage2, opt);
}

CodecConfig cnn_only_variant(const CodecConfig& vit_cfg) {
  CodecConfig c = vit_cfg;
  c.variant = CodecVariant::kCnnOnly;
  c.compression.clear();
  int halvings = 0;
  for (int p = c.patch; p > 1; p /= 2) ++halvings;
  int ch_in = c.channels;
  for (int i = 0; i < halvings; ++i) {
    int ch_out = std::min(32 << i, 128);
    c.compression.push_back({ch_in, ch_out, 4, 2});
    ch_in = ch_out;
  }
  c.compression.push_back({ch_in, c.levels_per_patch(), 1, 1});
  int lpp = c.levels_per_patch();
  c.channel_coding = {{lpp, 2 * lpp, 3, 1}, {2 * lpp, lpp, 3, 1}};
  c.validate();
  return c;
}

double eval_masked_loss(const std::vector<TrainSample>& data, const CodecConfig& cfg,
                        const CodecParams& params, phy::ChannelModel channel, double snr_db,
                        uint64_t seed) {
  BuildOptions bopt;
  bopt.mode = GraphMode::kEndToEnd;
  bopt.with_channel_cnn = true;
  auto net = build_codec_net<float>(cfg, bopt, 1);
  net.load(params);
  PlanCache cache(cfg);
  double total = 0;
  uint64_t draw = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    Rng srng(Rng::derive(seed, 0xa000 + draw));
    ++draw;
    int mr_decile = srng.uniform_int(0, 7);
    const MaskPlan& plan = cache.get(data, static_cast<int>(i), mr_decile);
    auto p = masking::apply_mask(data[i].image, plan);
    net.g.set_value(net.in_image, image_to_rows(p, cfg));
    net.g.set_value(net.latent_mask, latent_mask_values(plan, cfg));
    net.g.set_value(net.target, image_to_rows(p, cfg));
    net.g.set_value(net.pix_mask, image_to_rows(plan.mask, cfg));
    net.g.set_masked_counts(net.loss_masked, plan.n_total, plan.n_unmasked);
    set_channel_surrogate(net, channel, snr_db, Rng::derive(seed, 0xb000 + draw));
    total += net.g.forward(net.loss_masked);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace semlink::codec

#include "semlink/phy/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "semlink/common/rng.hpp"

namespace semlink::phy {

std::vector<cplx> awgn_n0(const std::vector<cplx>& x, double n0, uint64_t seed) {
  if (n0 <= 0) return x;
  Rng rng(seed);
  std::vector<cplx> out(x.size());
  const double s = std::sqrt(n0 / 2.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double re = rng.gaussian();
    double im = rng.gaussian();
    out[i] = x[i] + cplx(s * re, s * im);
  }
  return out;
}

std::vector<cplx> awgn(const std::vector<cplx>& x, double snr_db, uint64_t seed) {
  if (!std::isfinite(snr_db)) return x;  // noiseless sentinel
  return awgn_n0(x, std::pow(10.0, -snr_db / 10.0), seed);
}

std::vector<cplx> draw_fading_taps(const LinkConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  if (cfg.channel == ChannelModel::kRayleighFlat) return {rng.cgaussian(1.0)};
  if (cfg.channel != ChannelModel::kRayleighMultipath)
    throw std::invalid_argument("draw_fading_taps: not a fading channel");
  const int L = cfg.taps;
  std::vector<double> profile(static_cast<size_t>(L));
  double total = 0;
  for (int l = 0; l < L; ++l) {
    profile[static_cast<size_t>(l)] = std::pow(10.0, -cfg.tap_decay_db * l / 10.0);
    total += profile[static_cast<size_t>(l)];
  }
  std::vector<cplx> taps(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l)
    taps[static_cast<size_t>(l)] = rng.cgaussian(profile[static_cast<size_t>(l)] / total);
  return taps;
}

std::vector<cplx> apply_taps(const std::vector<cplx>& x, const std::vector<cplx>& taps,
                             const LinkConfig& cfg) {
  if (static_cast<int>(taps.size()) > cfg.cp)
    throw std::invalid_argument("apply_taps: " + std::to_string(taps.size()) +
                                " taps exceed CP length " + std::to_string(cfg.cp));
  std::vector<cplx> y(x.size(), cplx(0, 0));
  for (size_t l = 0; l < taps.size(); ++l) {
    const cplx h = taps[l];
    if (h == cplx(0, 0)) continue;
    for (size_t n = l; n < x.size(); ++n) y[n] += h * x[n - l];
  }
  return y;
}

std::vector<cplx> taps_to_gains(const std::vector<cplx>& taps, int fft_size) {
  std::vector<cplx> gains(static_cast<size_t>(fft_size));
  for (int k = 0; k < fft_size; ++k) {
    cplx acc(0, 0);
    for (size_t l = 0; l < taps.size(); ++l) {
      double ang = -2.0 * M_PI * k * static_cast<double>(l) / fft_size;
      acc += taps[l] * cplx(std::cos(ang), std::sin(ang));
    }
    gains[static_cast<size_t>(k)] = acc;
  }
  return gains;
}

ChannelOutput rayleigh_apply(const std::vector<cplx>& time, const LinkConfig& cfg,
                             double es_data, uint64_t seed) {
  ChannelOutput out;
  auto taps = draw_fading_taps(cfg, Rng::derive(seed, 0xfade));
  out.true_gains = taps_to_gains(taps, cfg.fft_size);
  out.samples = apply_taps(time, taps, cfg);
  if (std::isfinite(cfg.snr_db)) {
    double n0 = es_data * std::pow(10.0, -cfg.snr_db / 10.0);
    out.samples = awgn_n0(out.samples, n0, Rng::derive(seed, 0x0153));
  }
  return out;
}

}  // namespace semlink::phy

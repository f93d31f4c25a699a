#include "semlink/phy/ofdm.hpp"

#include <cmath>
#include <stdexcept>

#include "semlink/common/rng.hpp"

namespace semlink::phy {

namespace {
constexpr uint64_t kPilotSeed = 0x70696c6f74ULL;  // fixed, shared by tx and rx
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const double kInvSqrt10 = 1.0 / std::sqrt(10.0);
}  // namespace

std::vector<int> data_bins(const LinkConfig& cfg) {
  std::vector<bool> is_pilot(static_cast<size_t>(cfg.fft_size), false);
  for (int p : cfg.pilot_bins) is_pilot[static_cast<size_t>(p)] = true;
  std::vector<int> bins;
  bins.reserve(static_cast<size_t>(cfg.data_subcarriers()));
  for (int k = 0; k < cfg.fft_size; ++k)
    if (!is_pilot[static_cast<size_t>(k)]) bins.push_back(k);
  return bins;
}

std::vector<cplx> pilot_sequence(const LinkConfig& cfg) {
  Rng rng(kPilotSeed);
  std::vector<cplx> seq(cfg.pilot_bins.size());
  for (auto& p : seq) {
    double re = rng.uniform() < 0.5 ? -kInvSqrt2 : kInvSqrt2;
    double im = rng.uniform() < 0.5 ? -kInvSqrt2 : kInvSqrt2;
    p = cplx(re, im);
  }
  return seq;
}

cplx pad_symbol() { return cplx(kInvSqrt10, kInvSqrt10); }  // level-1 pair

OfdmFrame ofdm_modulate(const std::vector<cplx>& data, const LinkConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("ofdm_modulate: empty input");
  const int nd = cfg.data_subcarriers();
  const auto bins = data_bins(cfg);
  const auto pilots = pilot_sequence(cfg);

  OfdmFrame frame;
  frame.n_symbols = static_cast<int>((data.size() + nd - 1) / static_cast<size_t>(nd));
  frame.pad = frame.n_symbols * nd - static_cast<int>(data.size());
  frame.time.reserve(static_cast<size_t>(frame.n_symbols) * (cfg.fft_size + cfg.cp));

  std::vector<cplx> freq(static_cast<size_t>(cfg.fft_size));
  for (int s = 0; s < frame.n_symbols; ++s) {
    std::fill(freq.begin(), freq.end(), cplx(0, 0));
    for (size_t p = 0; p < cfg.pilot_bins.size(); ++p)
      freq[static_cast<size_t>(cfg.pilot_bins[p])] = pilots[p];
    for (int d = 0; d < nd; ++d) {
      size_t idx = static_cast<size_t>(s) * nd + d;
      freq[static_cast<size_t>(bins[static_cast<size_t>(d)])] =
          idx < data.size() ? data[idx] : pad_symbol();
    }
    std::vector<cplx> t = fft_copy(freq, true);
    for (int i = cfg.fft_size - cfg.cp; i < cfg.fft_size; ++i)
      frame.time.push_back(t[static_cast<size_t>(i)]);
    frame.time.insert(frame.time.end(), t.begin(), t.end());
  }
  return frame;
}

OfdmBins ofdm_demodulate(const std::vector<cplx>& time, const LinkConfig& cfg) {
  cfg.validate();
  const size_t sym_len = static_cast<size_t>(cfg.fft_size + cfg.cp);
  if (time.empty() || time.size() % sym_len != 0)
    throw std::invalid_argument("ofdm_demodulate: length " + std::to_string(time.size()) +
                                " is not a multiple of " + std::to_string(sym_len));
  const int n_symbols = static_cast<int>(time.size() / sym_len);
  const auto bins = data_bins(cfg);

  OfdmBins out;
  out.data.resize(static_cast<size_t>(n_symbols));
  out.pilots.resize(static_cast<size_t>(n_symbols));
  std::vector<cplx> t(static_cast<size_t>(cfg.fft_size));
  for (int s = 0; s < n_symbols; ++s) {
    const cplx* base = time.data() + static_cast<size_t>(s) * sym_len + cfg.cp;
    std::copy(base, base + cfg.fft_size, t.begin());
    std::vector<cplx> freq = fft_copy(t, false);
    auto& drow = out.data[static_cast<size_t>(s)];
    auto& prow = out.pilots[static_cast<size_t>(s)];
    drow.reserve(bins.size());
    prow.reserve(cfg.pilot_bins.size());
    for (int b : bins) drow.push_back(freq[static_cast<size_t>(b)]);
    for (int b : cfg.pilot_bins) prow.push_back(freq[static_cast<size_t>(b)]);
  }
  return out;
}

}  // namespace semlink::phy

#include "semlink/phy/link.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "semlink/common/rng.hpp"
#include "semlink/phy/channel.hpp"
#include "semlink/phy/ofdm.hpp"
#include "semlink/phy/qam.hpp"

namespace semlink::phy {

const char* channel_name(ChannelModel m) {
  switch (m) {
    case ChannelModel::kNoiseless: return "noiseless";
    case ChannelModel::kAwgn: return "awgn";
    case ChannelModel::kRayleighFlat: return "rayleigh-flat";
    case ChannelModel::kRayleighMultipath: return "rayleigh-mp";
  }
  return "?";
}

ChannelModel channel_from_name(const std::string& name) {
  if (name == "noiseless") return ChannelModel::kNoiseless;
  if (name == "awgn") return ChannelModel::kAwgn;
  if (name == "rayleigh-flat") return ChannelModel::kRayleighFlat;
  if (name == "rayleigh-mp" || name == "rayleigh-multipath" || name == "rayleigh")
    return ChannelModel::kRayleighMultipath;
  throw std::invalid_argument("unknown channel model '" + name + "'");
}

void LinkConfig::validate() const {
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
    throw std::invalid_argument("link: fft_size must be a power of two");
  if (cp < 0 || cp > fft_size) throw std::invalid_argument("link: invalid CP length");
  if (pilot_bins.empty() || static_cast<int>(pilot_bins.size()) >= fft_size)
    throw std::invalid_argument("link: pilots must leave room for data");
  for (int p : pilot_bins)
    if (p < 0 || p >= fft_size) throw std::invalid_argument("link: pilot bin out of range");
  if (channel == ChannelModel::kRayleighMultipath && taps > cp)
    throw std::invalid_argument("link: delay spread exceeds CP");
}

CsiEstimate ls_estimate(const std::vector<cplx>& rx_pilots, const std::vector<cplx>& tx_pilots,
                        const LinkConfig& cfg) {
  if (rx_pilots.size() != cfg.pilot_bins.size() || tx_pilots.size() != cfg.pilot_bins.size())
    throw std::invalid_argument("ls_estimate: pilot count mismatch");
  std::vector<cplx> at_pilots(tx_pilots.size());
  for (size_t i = 0; i < tx_pilots.size(); ++i) {
    if (std::abs(tx_pilots[i]) < 1e-15)
      throw std::invalid_argument("ls_estimate: zero transmit pilot at index " +
                                  std::to_string(i));
    at_pilots[i] = rx_pilots[i] / tx_pilots[i];
  }
  CsiEstimate est;
  est.method = CsiEstimate::Method::kLs;
  est.gains.assign(static_cast<size_t>(cfg.fft_size), cplx(0, 0));
  const auto& pb = cfg.pilot_bins;
  for (int k = 0; k < cfg.fft_size; ++k) {
    if (k <= pb.front()) {
      est.gains[static_cast<size_t>(k)] = at_pilots.front();
      continue;
    }
    if (k >= pb.back()) {
      est.gains[static_cast<size_t>(k)] = at_pilots.back();
      continue;
    }
    size_t hi = static_cast<size_t>(std::upper_bound(pb.begin(), pb.end(), k) - pb.begin());
    size_t lo = hi - 1;
    double t = static_cast<double>(k - pb[lo]) / static_cast<double>(pb[hi] - pb[lo]);
    est.gains[static_cast<size_t>(k)] = at_pilots[lo] * (1.0 - t) + at_pilots[hi] * t;
  }
  return est;
}

std::vector<cplx> zf_equalize(const std::vector<cplx>& rx_data, const std::vector<int>& bins,
                              const CsiEstimate& csi) {
  if (rx_data.size() != bins.size())
    throw std::invalid_argument("zf_equalize: bin count mismatch");
  std::vector<cplx> out(rx_data.size());
  for (size_t i = 0; i < rx_data.size(); ++i) {
    const cplx h = csi.gains[static_cast<size_t>(bins[i])];
    if (std::abs(h) <= 1e-12)
      out[i] = cplx(0, 0);  // erased bin, do not divide
    else
      out[i] = rx_data[i] / h;
  }
  return out;
}

std::vector<double> transmit_link(const std::vector<double>& levels, const LinkConfig& cfg,
                                  uint64_t call_seed, const ChannelHop* hop) {
  cfg.validate();
  for (double v : levels)
    if (!std::isfinite(v)) throw std::invalid_argument("transmit_link: non-finite level");

  const auto symbols = qam16_map(levels);
  const auto frame = ofdm_modulate(symbols, cfg);

  // SNR reference: mean data-subcarrier symbol energy (pad filler included)
  double es = 0;
  size_t n_data = symbols.size() + static_cast<size_t>(frame.pad);
  es += static_cast<double>(frame.pad) * std::norm(pad_symbol());
  for (const cplx& s : symbols) es += std::norm(s);
  es /= static_cast<double>(n_data);

  const uint64_t seed = Rng::derive(cfg.seed, call_seed);
  std::vector<cplx> rx_time;
  std::vector<cplx> true_gains(static_cast<size_t>(cfg.fft_size), cplx(1, 0));
  if (hop) {
    if (cfg.perfect_csi && cfg.channel != ChannelModel::kNoiseless &&
        cfg.channel != ChannelModel::kAwgn)
      throw std::invalid_argument("transmit_link: perfect CSI unavailable through a channel hop");
    rx_time = (*hop)(frame.time);
    if (rx_time.size() != frame.time.size())
      throw std::runtime_error("transmit_link: channel hop changed the sample count");
  } else {
    switch (cfg.channel) {
      case ChannelModel::kNoiseless:
        rx_time = frame.time;
        break;
      case ChannelModel::kAwgn: {
        double n0 = std::isfinite(cfg.snr_db) ? es * std::pow(10.0, -cfg.snr_db / 10.0) : 0.0;
        rx_time = awgn_n0(frame.time, n0, Rng::derive(seed, 0x0153));
        break;
      }
      case ChannelModel::kRayleighFlat:
      case ChannelModel::kRayleighMultipath: {
        auto out = rayleigh_apply(frame.time, cfg, es, seed);
        rx_time = std::move(out.samples);
        true_gains = std::move(out.true_gains);
        break;
      }
    }
  }

  const auto rx = ofdm_demodulate(rx_time, cfg);
  const auto bins = data_bins(cfg);
  const auto tx_pilots = pilot_sequence(cfg);

  std::vector<cplx> eq;
  eq.reserve(symbols.size() + static_cast<size_t>(frame.pad));
  for (size_t s = 0; s < rx.data.size(); ++s) {
    CsiEstimate csi;
    if (cfg.perfect_csi) {
      csi.gains = true_gains;
      csi.method = CsiEstimate::Method::kPerfect;
    } else {
      csi = ls_estimate(rx.pilots[s], tx_pilots, cfg);
    }
    auto row = zf_equalize(rx.data[s], bins, csi);
    eq.insert(eq.end(), row.begin(), row.end());
  }
  eq.resize(symbols.size());  // strip pad
  return qam16_soft(eq);
}

double ser_oracle(double es_n0_db) {
  double es_n0 = std::pow(10.0, es_n0_db / 10.0);
  double q = 0.5 * std::erfc(std::sqrt(es_n0 / 5.0) / std::sqrt(2.0));
  double p = 1.5 * q;
  return 1.0 - (1.0 - p) * (1.0 - p);
}

void save_iq(const std::vector<cplx>& samples, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("iq: cannot open " + path.string());
  std::vector<float> buf(samples.size() * 2);
  for (size_t i = 0; i < samples.size(); ++i) {
    buf[2 * i] = static_cast<float>(samples[i].real());
    buf[2 * i + 1] = static_cast<float>(samples[i].imag());
  }
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::vector<cplx> load_iq(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("iq: cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() % 8 != 0) throw std::runtime_error("iq: truncated I/Q pairs in " + path.string());
  std::vector<cplx> out(raw.size() / 8);
  const float* p = reinterpret_cast<const float*>(raw.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] = cplx(p[2 * i], p[2 * i + 1]);
  return out;
}

}  // namespace semlink::phy

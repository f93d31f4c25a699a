#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semlink/phy/fft.hpp"

namespace semlink::phy {

enum class ChannelModel : uint8_t {
  kNoiseless = 0,
  kAwgn = 1,
  kRayleighFlat = 2,
  kRayleighMultipath = 3,
};

const char* channel_name(ChannelModel m);
ChannelModel channel_from_name(const std::string& name);

// OFDM/channel configuration. Defaults follow the simulated system: 64
// subcarriers, 9 comb pilots at stride 7 (bins 0,7,...,56), the remaining 55
// bins carrying data, CP 16. SNR is data-subcarrier Es over complex noise
// variance.
struct LinkConfig {
  int fft_size = 64;
  int cp = 16;
  std::vector<int> pilot_bins = {0, 7, 14, 21, 28, 35, 42, 49, 56};
  ChannelModel channel = ChannelModel::kAwgn;
  double snr_db = 10.0;
  int taps = 8;              // multipath tap count
  double tap_decay_db = 3.0; // exponential power-delay profile step
  uint64_t seed = 1;
  bool perfect_csi = false;

  int data_subcarriers() const { return fft_size - static_cast<int>(pilot_bins.size()); }
  void validate() const;
};

struct CsiEstimate {
  std::vector<cplx> gains;  // per subcarrier, length = fft_size
  enum class Method : uint8_t { kLs, kPerfect } method = Method::kLs;
};

// Y/X at pilot bins, linear interpolation between pilots, nearest-pilot
// extrapolation outside. Rejects zero transmit pilots.
CsiEstimate ls_estimate(const std::vector<cplx>& rx_pilots, const std::vector<cplx>& tx_pilots,
                        const LinkConfig& cfg);

// X = Y/H per bin; |H| <= 1e-12 flags the bin as erased (output 0).
std::vector<cplx> zf_equalize(const std::vector<cplx>& rx_data, const std::vector<int>& bins,
                              const CsiEstimate& csi);

// Optional detour for the time-domain samples (the UDP channel emulator);
// when set, the local channel stage is skipped.
using ChannelHop = std::function<std::vector<cplx>(const std::vector<cplx>&)>;

// Full chain: map -> modulate -> channel -> demodulate -> estimate ->
// equalize -> soft levels (pad stripped, length preserved).
std::vector<double> transmit_link(const std::vector<double>& levels, const LinkConfig& cfg,
                                  uint64_t call_seed, const ChannelHop* hop = nullptr);

// Theoretical uncoded 16QAM symbol error rate over AWGN:
// SER = 1 - (1-p)^2, p = (3/2) Q(sqrt(Es/(5 N0))).
double ser_oracle(double es_n0_db);

// IQ sample file: interleaved little-endian 32-bit float I/Q.
void save_iq(const std::vector<cplx>& samples, const std::filesystem::path& path);
std::vector<cplx> load_iq(const std::filesystem::path& path);

}  // namespace semlink::phy

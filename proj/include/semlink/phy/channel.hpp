#pragma once

#include <vector>

#include "semlink/phy/link.hpp"

namespace semlink::phy {

// Circular complex AWGN, per-complex-sample variance n0 split equally across
// real/imag. A non-finite snr acts as the noiseless sentinel.
std::vector<cplx> awgn_n0(const std::vector<cplx>& x, double n0, uint64_t seed);
std::vector<cplx> awgn(const std::vector<cplx>& x, double snr_db, uint64_t seed);  // unit Es

// Block-fading taps, constant per frame. Multipath: `taps` i.i.d. complex
// Gaussian taps with an exponential power-delay profile (tap_decay_db per
// tap), normalized to unit total power. Flat: a single CN(0,1) tap.
std::vector<cplx> draw_fading_taps(const LinkConfig& cfg, uint64_t seed);

// Linear convolution, length preserved; the CP absorbs the tail so the
// per-symbol channel is circular. Rejects taps longer than the CP.
std::vector<cplx> apply_taps(const std::vector<cplx>& x, const std::vector<cplx>& taps,
                             const LinkConfig& cfg);

// True per-subcarrier gains: H_k = sum_l h_l exp(-j 2 pi k l / N).
std::vector<cplx> taps_to_gains(const std::vector<cplx>& taps, int fft_size);

struct ChannelOutput {
  std::vector<cplx> samples;
  std::vector<cplx> true_gains;  // per subcarrier
};

// Fading + AWGN at cfg.snr_db (noise calibrated to es_data).
ChannelOutput rayleigh_apply(const std::vector<cplx>& time, const LinkConfig& cfg,
                             double es_data, uint64_t seed);

}  // namespace semlink::phy

#pragma once

#include <vector>

#include "semlink/phy/link.hpp"

namespace semlink::phy {

// data-carrying bins in ascending order (all non-pilot bins)
std::vector<int> data_bins(const LinkConfig& cfg);

// known unit-power QPSK-like pilot sequence, fixed seed shared by both ends
std::vector<cplx> pilot_sequence(const LinkConfig& cfg);

// pad filler for the last OFDM symbol: level-1 pairs, stripped after demap
cplx pad_symbol();

struct OfdmFrame {
  std::vector<cplx> time;  // n_symbols * (fft_size + cp) samples
  int n_symbols = 0;
  int pad = 0;             // filler data symbols appended to fill the last chunk
};

// Chunks data symbols 55 per OFDM symbol, inserts pilots, IFFT, prepends CP.
OfdmFrame ofdm_modulate(const std::vector<cplx>& data, const LinkConfig& cfg);

struct OfdmBins {
  std::vector<std::vector<cplx>> data;    // [symbol][data bin]
  std::vector<std::vector<cplx>> pilots;  // [symbol][pilot bin]
};

// CP removal + FFT; exact inverse of ofdm_modulate in a noiseless channel.
OfdmBins ofdm_demodulate(const std::vector<cplx>& time, const LinkConfig& cfg);

}  // namespace semlink::phy

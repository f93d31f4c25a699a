#pragma once

#include <vector>

#include "semlink/phy/fft.hpp"

namespace semlink::phy {

// 16QAM from level pairs: symbol = (I + jQ)/sqrt(10), unit mean power over
// the constellation. Levels come from {-3,-1,1,3}.
std::vector<cplx> qam16_map(const std::vector<double>& levels);

// nearest level per axis; thresholds -2/0/2, ties toward the larger level
double nearest_level(double v);

// hard decision back to levels
std::vector<double> qam16_demap(const std::vector<cplx>& symbols);

// soft levels (scale-only inverse of the mapping), input to the dequantizer
std::vector<double> qam16_soft(const std::vector<cplx>& symbols);

}  // namespace semlink::phy

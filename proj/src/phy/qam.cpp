#include "semlink/phy/qam.hpp"

#include <cmath>
#include <stdexcept>

namespace semlink::phy {

namespace {
const double kInvSqrt10 = 1.0 / std::sqrt(10.0);
const double kSqrt10 = std::sqrt(10.0);
}  // namespace

std::vector<cplx> qam16_map(const std::vector<double>& levels) {
  if (levels.size() % 2 != 0)
    throw std::invalid_argument("qam16_map: odd level count " + std::to_string(levels.size()));
  std::vector<cplx> out(levels.size() / 2);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = cplx(levels[2 * i] * kInvSqrt10, levels[2 * i + 1] * kInvSqrt10);
  return out;
}

double nearest_level(double v) {
  if (v < -2.0) return -3.0;
  if (v < 0.0) return -1.0;
  if (v < 2.0) return 1.0;
  return 3.0;
}

std::vector<double> qam16_demap(const std::vector<cplx>& symbols) {
  std::vector<double> out(symbols.size() * 2);
  for (size_t i = 0; i < symbols.size(); ++i) {
    out[2 * i] = nearest_level(symbols[i].real() * kSqrt10);
    out[2 * i + 1] = nearest_level(symbols[i].imag() * kSqrt10);
  }
  return out;
}

std::vector<double> qam16_soft(const std::vector<cplx>& symbols) {
  std::vector<double> out(symbols.size() * 2);
  for (size_t i = 0; i < symbols.size(); ++i) {
    out[2 * i] = symbols[i].real() * kSqrt10;
    out[2 * i + 1] = symbols[i].imag() * kSqrt10;
  }
  return out;
}

}  // namespace semlink::phy

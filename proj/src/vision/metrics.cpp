#include "semlink/vision/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace semlink::vision {

double psnr(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.numel(); ++i) {
    double d = static_cast<double>(a.data[i]) - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse <= 0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace {
constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L=1
constexpr double kC2 = 0.03 * 0.03;
}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  if (a.height < kWin || a.width < kWin)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  std::vector<float> ga = to_gray(a);
  std::vector<float> gb = to_gray(b);

  double kern[kWin][kWin];
  double ksum = 0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      double dy = i - kWin / 2, dx = j - kWin / 2;
      kern[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      ksum += kern[i][j];
    }
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) kern[i][j] /= ksum;

  const int w = a.width;
  double total = 0;
  long count = 0;
  for (int y = 0; y + kWin <= a.height; ++y)
    for (int x = 0; x + kWin <= a.width; ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          double va = ga[static_cast<size_t>(y + i) * w + (x + j)];
          double vb = gb[static_cast<size_t>(y + i) * w + (x + j)];
          double kv = kern[i][j];
          mx += kv * va;
          my += kv * vb;
          sxx += kv * va * va;
          syy += kv * vb * vb;
          sxy += kv * va * vb;
        }
      double vx = sxx - mx * mx;
      double vy = syy - my * my;
      double cxy = sxy - mx * my;
      double s = ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
                 ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      total += s;
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace semlink::vision

#pragma once

#include "semlink/vision/image.hpp"

namespace semlink::vision {

// 10*log10(1/MSE) over [0,1] pixels; capped at 100 dB when MSE is zero.
double psnr(const ImageTensor& a, const ImageTensor& b);

// Mean local SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, dynamic range 1. Windows fully inside the image.
double ssim(const ImageTensor& a, const ImageTensor& b);

}  // namespace semlink::vision

#pragma once

#include <complex>
#include <vector>

namespace semlink::phy {

using cplx = std::complex<double>;

// In-place radix-2 FFT with unitary 1/sqrt(N) scaling in both directions,
// so time- and frequency-domain power agree (Parseval). N must be a power
// of two.
void fft(std::vector<cplx>& x, bool inverse);

std::vector<cplx> fft_copy(const std::vector<cplx>& x, bool inverse);

}  // namespace semlink::phy

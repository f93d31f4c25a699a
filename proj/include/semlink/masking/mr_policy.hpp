#pragma once

#include <filesystem>
#include <vector>

#include "semlink/nn/tensor.hpp"

namespace semlink::masking {

struct SweepRecord {
  double snr_db = 0;
  double mr = 0;
  double metric = 0;
};

// Mask-ratio policy: maps (SNR dB, object-area fraction) to an MR in [0,0.7],
// non-increasing in SNR at fixed area. Two realizations behind one type:
// a lookup table with bilinear interpolation (canonical), and a 2->16->1
// perceptron with sigmoid output scaled by 0.7 distilled from a table.
class MrPolicy {
 public:
  enum class Kind { kTable, kPerceptron };

  double eval(double snr_db, double area_frac) const;
  Kind kind() const { return kind_; }

  // Anchored to the reported optimum per test SNR: 0.7 at and below 0 dB,
  // 0 at and above 5 dB.
  static MrPolicy paper_default();

  // Per-SNR metric-argmax MR (ties toward less masking), then a running-min
  // projection along ascending SNR. Rejects an empty sweep.
  static MrPolicy fit(const std::vector<SweepRecord>& records);

  // Trains the perceptron to mimic `table` on its grid; returns achieved MSE
  // through *fit_mse (target < 0.01).
  static MrPolicy distill_perceptron(const MrPolicy& table, uint64_t seed,
                                     double* fit_mse = nullptr);

  // CSV "snr_db,area_frac,mr" (full grid).
  static MrPolicy load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;

  const std::vector<double>& snr_grid() const { return snrs_; }

 private:
  double eval_table(double snr_db, double area_frac) const;
  double eval_net_raw(double snr_db, double area_frac) const;

  Kind kind_ = Kind::kTable;
  std::vector<double> snrs_;                // ascending
  std::vector<double> areas_;               // ascending
  std::vector<std::vector<double>> table_;  // [snr][area]
  // perceptron weights (2->16->1, tanh hidden)
  nn::TensorD w1_, b1_, w2_, b2_;
};

}  // namespace semlink::masking

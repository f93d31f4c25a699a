#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace semlink::cli {

// All emitted CSVs carry the version comment line "# semlink-csv v1" above
// the header row. Numeric cells are fixed-format for byte-identical reruns.
inline constexpr const char* kCsvVersionLine = "# semlink-csv v1";

std::string fmt_double(double v);  // canonical %.6f

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  size_t width_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

// Mean and normal-approximation 95% CI per metric column, grouped by all
// non-metric columns. Inputs must share an identical header (the offending
// column is named otherwise). Metric columns: psnr_cs, ssim_cs, psnr_db,
// ssim, cs, loss.
CsvTable aggregate_tables(const std::vector<CsvTable>& tables);

}  // namespace semlink::cli

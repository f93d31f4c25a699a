#include "semlink/cli/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace semlink::cli {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
    : width_(columns.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("csv: cannot open " + path.string());
  out_ << kCsvVersionLine << "\n";
  for (size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_)
    throw std::invalid_argument("csv: row width " + std::to_string(cells.size()) +
                                " != header width " + std::to_string(width_));
  for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << "\n";
}

int CsvTable::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

const std::set<std::string>& metric_columns() {
  static const std::set<std::string> cols{"psnr_cs", "ssim_cs", "psnr_db", "ssim", "cs", "loss"};
  return cols;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("csv: cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool header_done = false;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;  // version / comments
    if (!header_done) {
      t.columns = split_row(line);
      header_done = true;
      continue;
    }
    auto cells = split_row(line);
    if (cells.size() != t.columns.size())
      throw std::runtime_error("csv " + path.string() + ": row width mismatch near '" + line +
                               "'");
    t.rows.push_back(std::move(cells));
  }
  if (!header_done) throw std::runtime_error("csv " + path.string() + ": no header");
  return t;
}

CsvTable aggregate_tables(const std::vector<CsvTable>& tables) {
  if (tables.empty()) throw std::invalid_argument("report: no input tables");
  const auto& cols = tables[0].columns;
  for (size_t i = 1; i < tables.size(); ++i) {
    if (tables[i].columns.size() != cols.size())
      throw std::runtime_error("report: header width differs between inputs");
    for (size_t c = 0; c < cols.size(); ++c)
      if (tables[i].columns[c] != cols[c])
        throw std::runtime_error("report: mismatched column '" + tables[i].columns[c] +
                                 "' (expected '" + cols[c] + "')");
  }

  std::vector<size_t> key_idx, met_idx;
  for (size_t c = 0; c < cols.size(); ++c) {
    if (metric_columns().count(cols[c]))
      met_idx.push_back(c);
    else
      key_idx.push_back(c);
  }
  if (met_idx.empty()) throw std::runtime_error("report: no metric columns found");

  // key -> per-metric value lists, first-seen order preserved
  std::map<std::vector<std::string>, std::vector<std::vector<double>>> groups;
  std::vector<std::vector<std::string>> order;
  for (const auto& t : tables)
    for (const auto& row : t.rows) {
      std::vector<std::string> key;
      for (size_t c : key_idx) key.push_back(row[c]);
      auto it = groups.find(key);
      if (it == groups.end()) {
        it = groups.emplace(key, std::vector<std::vector<double>>(met_idx.size())).first;
        order.push_back(key);
      }
      for (size_t m = 0; m < met_idx.size(); ++m)
        it->second[m].push_back(std::stod(row[met_idx[m]]));
    }

  CsvTable out;
  for (size_t c : key_idx) out.columns.push_back(cols[c]);
  for (size_t m : met_idx) {
    out.columns.push_back(cols[m] + "_mean");
    out.columns.push_back(cols[m] + "_ci95");
  }
  for (const auto& key : order) {
    const auto& vals = groups[key];
    std::vector<std::string> row = key;
    for (const auto& v : vals) {
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0;
      for (double x : v) var += (x - mean) * (x - mean);
      double ci = 0;
      if (v.size() > 1) {
        var /= static_cast<double>(v.size() - 1);
        ci = 1.96 * std::sqrt(var / static_cast<double>(v.size()));
      }
      row.push_back(fmt_double(mean));
      row.push_back(fmt_double(ci));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace semlink::cli

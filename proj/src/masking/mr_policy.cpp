#include "semlink/masking/mr_policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "semlink/nn/adam.hpp"
#include "semlink/nn/graph.hpp"

namespace semlink::masking {

namespace {

constexpr double kMrCap = 0.7;

// query normalization for the perceptron input
double norm_snr(double snr_db) { return snr_db / 15.0; }

double interp_axis(const std::vector<double>& grid, double q, size_t& i0, size_t& i1) {
  if (grid.size() == 1 || q <= grid.front()) {
    i0 = i1 = 0;
    return 0;
  }
  if (q >= grid.back()) {
    i0 = i1 = grid.size() - 1;
    return 0;
  }
  size_t hi = static_cast<size_t>(std::upper_bound(grid.begin(), grid.end(), q) - grid.begin());
  i0 = hi - 1;
  i1 = hi;
  return (q - grid[i0]) / (grid[i1] - grid[i0]);
}

}  // namespace

double MrPolicy::eval_table(double snr_db, double area_frac) const {
  size_t s0, s1, a0, a1;
  double ts = interp_axis(snrs_, snr_db, s0, s1);
  double ta = interp_axis(areas_, area_frac, a0, a1);
  double v00 = table_[s0][a0], v01 = table_[s0][a1];
  double v10 = table_[s1][a0], v11 = table_[s1][a1];
  double v0 = v00 + (v01 - v00) * ta;
  double v1 = v10 + (v11 - v10) * ta;
  return v0 + (v1 - v0) * ts;
}

double MrPolicy::eval_net_raw(double snr_db, double area_frac) const {
  const int hidden = w1_.shape[1];
  double acc_out = b2_[0];
  for (int h = 0; h < hidden; ++h) {
    double z = b1_[static_cast<size_t>(h)] +
               w1_[static_cast<size_t>(h)] * norm_snr(snr_db) +
               w1_[static_cast<size_t>(hidden + h)] * area_frac;
    acc_out += w2_[static_cast<size_t>(h)] * std::tanh(z);
  }
  return kMrCap / (1.0 + std::exp(-acc_out));
}

double MrPolicy::eval(double snr_db, double area_frac) const {
  double v;
  if (kind_ == Kind::kTable) {
    v = eval_table(snr_db, area_frac);
  } else {
    // running-min over the SNR axis keeps the perceptron monotone as well
    v = eval_net_raw(snr_db, area_frac);
    for (double s = -10.0; s < snr_db; s += 1.0)
      v = std::min(v, eval_net_raw(s, area_frac));
  }
  return std::clamp(v, 0.0, kMrCap);
}

MrPolicy MrPolicy::paper_default() {
  MrPolicy p;
  p.kind_ = Kind::kTable;
  p.snrs_ = {-5, 0, 5, 10, 15};
  p.areas_ = {0.0, 1.0};
  p.table_ = {{0.7, 0.7}, {0.7, 0.7}, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
  return p;
}

MrPolicy MrPolicy::fit(const std::vector<SweepRecord>& records) {
  if (records.empty()) throw std::invalid_argument("mr policy fit: empty sweep");
  std::map<double, std::map<double, double>> by_snr;  // snr -> mr -> best metric
  for (const auto& r : records) {
    auto& row = by_snr[r.snr_db];
    auto it = row.find(r.mr);
    if (it == row.end())
      row[r.mr] = r.metric;
    else
      it->second = std::max(it->second, r.metric);
  }
  MrPolicy p;
  p.kind_ = Kind::kTable;
  p.areas_ = {0.0, 1.0};
  for (const auto& [snr, row] : by_snr) {
    // argmax over MR, ties toward the smallest MR (less masking)
    double best_mr = row.begin()->first;
    double best_metric = row.begin()->second;
    for (const auto& [mr, metric] : row) {
      if (metric > best_metric) {
        best_metric = metric;
        best_mr = mr;
      }
    }
    p.snrs_.push_back(snr);
    double v = std::clamp(best_mr, 0.0, kMrCap);
    p.table_.push_back({v, v});
  }
  // monotone projection: non-increasing along ascending SNR
  for (size_t i = 1; i < p.table_.size(); ++i)
    for (size_t j = 0; j < p.areas_.size(); ++j)
      p.table_[i][j] = std::min(p.table_[i][j], p.table_[i - 1][j]);
  return p;
}

MrPolicy MrPolicy::distill_perceptron(const MrPolicy& table, uint64_t seed, double* fit_mse) {
  using namespace semlink::nn;
  if (table.kind_ != Kind::kTable)
    throw std::invalid_argument("mr policy: distillation source must be a table");

  // training grid: the table's own knots densified along SNR
  std::vector<std::pair<double, double>> inputs;
  std::vector<double> targets;
  double lo = table.snrs_.front(), hi = table.snrs_.back();
  for (double s = lo; s <= hi + 1e-9; s += (hi - lo) / 40.0) {
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      inputs.emplace_back(s, a);
      targets.push_back(table.eval(s, a));
    }
  }
  const int n = static_cast<int>(inputs.size());
  const int hidden = 16;

  Rng rng(seed);
  Graph<double> g;
  NodeId x = g.input({n, 2}, "x");
  NodeId w1 = g.param(TensorD::randn({2, hidden}, rng, 0.8), "mrnet.w1");
  NodeId b1 = g.param(TensorD::zeros({hidden}), "mrnet.b1");
  NodeId w2 = g.param(TensorD::randn({hidden, 1}, rng, 0.5), "mrnet.w2");
  NodeId b2 = g.param(TensorD::zeros({1}), "mrnet.b2");
  NodeId h = g.tanh(g.add_bias(g.matmul(x, w1), b1));
  NodeId out = g.scale(g.sigmoid(g.add_bias(g.matmul(h, w2), b2)), kMrCap);
  NodeId t = g.input({n, 1}, "t");
  NodeId loss = g.mse_loss(out, t);

  TensorD xv({n, 2});
  TensorD tv({n, 1});
  for (int i = 0; i < n; ++i) {
    xv[static_cast<size_t>(i) * 2] = norm_snr(inputs[static_cast<size_t>(i)].first);
    xv[static_cast<size_t>(i) * 2 + 1] = inputs[static_cast<size_t>(i)].second;
    tv[static_cast<size_t>(i)] = targets[static_cast<size_t>(i)];
  }
  g.set_value(x, xv);
  g.set_value(t, tv);

  AdamState<double> st;
  st.lr = 0.02;
  double best = 1e9;
  for (int it = 0; it < 4000; ++it) {
    double l = g.forward(loss);
    best = std::min(best, l);
    if (l < 2e-4) break;
    g.zero_param_grads();
    g.backward(loss);
    adam_step(g, g.params(), st);
  }
  double final_loss = g.forward(loss);
  if (fit_mse) *fit_mse = final_loss;

  MrPolicy p = table;  // keep the table for reference/save
  p.kind_ = Kind::kPerceptron;
  // [2, hidden] row-major: row 0 = snr weights, row 1 = area weights
  p.w1_ = g.value(w1);
  p.b1_ = g.value(b1);
  p.w2_ = g.value(w2);
  p.b2_ = g.value(b2);
  return p;
}

MrPolicy MrPolicy::load_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("mr policy: cannot open " + path.string());
  std::string line;
  std::map<double, std::map<double, double>> cells;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("snr_db", 0) == 0) continue;  // header
    double snr, area, mr;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &snr, &area, &mr) != 3)
      throw std::runtime_error("mr policy " + path.string() + ": bad row at line " +
                               std::to_string(lineno));
    cells[snr][area] = mr;
  }
  if (cells.empty()) throw std::runtime_error("mr policy " + path.string() + ": no rows");
  MrPolicy p;
  p.kind_ = Kind::kTable;
  const auto& first_row = cells.begin()->second;
  for (const auto& [a, _] : first_row) p.areas_.push_back(a);
  for (const auto& [snr, row] : cells) {
    if (row.size() != p.areas_.size())
      throw std::runtime_error("mr policy " + path.string() + ": incomplete grid at snr " +
                               std::to_string(snr));
    p.snrs_.push_back(snr);
    std::vector<double> vals;
    for (const auto& [a, mr] : row) vals.push_back(std::clamp(mr, 0.0, kMrCap));
    p.table_.push_back(std::move(vals));
  }
  return p;
}

void MrPolicy::save_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("mr policy: cannot write " + path.string());
  f << "snr_db,area_frac,mr\n";
  char buf[96];
  for (size_t i = 0; i < snrs_.size(); ++i)
    for (size_t j = 0; j < areas_.size(); ++j) {
      double v = kind_ == Kind::kTable ? table_[i][j] : eval(snrs_[i], areas_[j]);
      std::snprintf(buf, sizeof buf, "%.3f,%.4f,%.4f\n", snrs_[i], areas_[j], v);
      f << buf;
    }
}

}  // namespace semlink::masking

#pragma once

// Central finite-difference oracle for autodiff checks. Independent of the
// backward pass: it only ever calls Graph::forward on perturbed leaf values.

#include <algorithm>
#include <cmath>
#include <string>

#include "semlink/nn/graph.hpp"

namespace gradcheck {

struct Result {
  double max_err = 0.0;
  std::string where;
};

// Compares analytic parameter gradients against central differences.
// Error metric: |analytic - numeric| / max(1, |analytic|, |numeric|).
inline Result check_params(semlink::nn::Graph<double>& g, semlink::nn::NodeId loss,
                           const std::vector<semlink::nn::NodeId>& param_ids,
                           double eps = 1e-4) {
  using semlink::nn::NodeId;
  g.zero_param_grads();
  g.forward(loss);
  g.backward(loss);
  Result res;
  for (NodeId pid : param_ids) {
    const auto analytic = g.param_grad(pid);  // copy before perturbing
    auto& pv = g.mutable_value(pid);
    for (size_t j = 0; j < pv.numel(); ++j) {
      double keep = pv[j];
      pv[j] = keep + eps;
      double lp = g.forward(loss);
      pv[j] = keep - eps;
      double lm = g.forward(loss);
      pv[j] = keep;
      double numeric = (lp - lm) / (2.0 * eps);
      double a = analytic[j];
      double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > res.max_err) {
        res.max_err = err;
        res.where = g.name(pid) + "[" + std::to_string(j) + "]";
      }
    }
  }
  g.forward(loss);  // restore clean forward state
  return res;
}

}  // namespace gradcheck

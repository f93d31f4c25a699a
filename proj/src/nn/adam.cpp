#include "semlink/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace semlink::nn {

template <typename T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>*>>& params,
               const std::vector<const Tensor<T>*>& grads, AdamState<T>& state) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  if (state.lr <= 0) throw std::invalid_argument("adam_step: lr must be positive");
  // validate everything before touching any parameter
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& name = params[i].first;
    if (!params[i].second->same_shape(*grads[i]))
      throw std::invalid_argument("adam_step: gradient shape mismatch for '" + name + "'");
    for (T gv : grads[i]->data)
      if (!std::isfinite(static_cast<double>(gv)))
        throw std::runtime_error("adam_step: non-finite gradient in '" + name +
                                 "', step rejected");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& name = params[i].first;
    auto& p = params[i].second->data;
    const auto& g = grads[i]->data;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(p.size(), T(0));
    if (v.empty()) v.assign(p.size(), T(0));
    if (m.size() != p.size() || v.size() != p.size())
      throw std::invalid_argument("adam_step: stale moment buffer for '" + name + "'");
    for (size_t j = 0; j < p.size(); ++j) {
      double gd = g[j];
      double md = state.beta1 * m[j] + (1.0 - state.beta1) * gd;
      double vd = state.beta2 * v[j] + (1.0 - state.beta2) * gd * gd;
      m[j] = static_cast<T>(md);
      v[j] = static_cast<T>(vd);
      double mhat = md / bc1;
      double vhat = vd / bc2;
      p[j] = static_cast<T>(p[j] - state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
    }
  }
}

template <typename T>
void adam_step(Graph<T>& g, const std::vector<NodeId>& param_ids, AdamState<T>& state) {
  std::vector<std::pair<std::string, Tensor<T>*>> params;
  std::vector<const Tensor<T>*> grads;
  params.reserve(param_ids.size());
  grads.reserve(param_ids.size());
  for (NodeId id : param_ids) {
    params.emplace_back(g.name(id), &g.mutable_value(id));
    grads.push_back(&g.param_grad(id));
  }
  adam_step(params, grads, state);
}

template void adam_step<float>(std::vector<std::pair<std::string, Tensor<float>*>>&,
                               const std::vector<const Tensor<float>*>&, AdamState<float>&);
template void adam_step<double>(std::vector<std::pair<std::string, Tensor<double>*>>&,
                                const std::vector<const Tensor<double>*>&, AdamState<double>&);
template void adam_step<float>(Graph<float>&, const std::vector<NodeId>&, AdamState<float>&);
template void adam_step<double>(Graph<double>&, const std::vector<NodeId>&, AdamState<double>&);

}  // namespace semlink::nn

#pragma once

#include <map>
#include <string>
#include <vector>

#include "semlink/nn/graph.hpp"
#include "semlink/nn/tensor.hpp"

namespace semlink::nn {

// Adam with bias correction. Defaults: lr per the training setup, beta1 0.9,
// beta2 0.999, epsilon 1e-8. Moment buffers are keyed by parameter name.
template <typename T>
struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step = 0;
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
};

// One update over named parameter/gradient pairs. Rejects the whole step
// (no mutation) if any gradient is non-finite, naming the parameter.
template <typename T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>*>>& params,
               const std::vector<const Tensor<T>*>& grads, AdamState<T>& state);

// Convenience: step the given graph params using their accumulated grads.
template <typename T>
void adam_step(Graph<T>& g, const std::vector<NodeId>& param_ids, AdamState<T>& state);

extern template void adam_step<float>(std::vector<std::pair<std::string, Tensor<float>*>>&,
                                      const std::vector<const Tensor<float>*>&,
                                      AdamState<float>&);
extern template void adam_step<double>(std::vector<std::pair<std::string, Tensor<double>*>>&,
                                       const std::vector<const Tensor<double>*>&,
                                       AdamState<double>&);
extern template void adam_step<float>(Graph<float>&, const std::vector<NodeId>&,
                                      AdamState<float>&);
extern template void adam_step<double>(Graph<double>&, const std::vector<NodeId>&,
                                       AdamState<double>&);

}  // namespace semlink::nn

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semlink/nn/tensor.hpp"

namespace semlink::nn {

using NodeId = int;

enum class OpKind : uint8_t {
  kInput,
  kParam,
  kConst,
  kAdd,
  kMul,
  kAddBias,
  kScale,
  kMatmul,
  kBatchMatmul,
  kConv2d,
  kConvTranspose2d,
  kLayerNorm,
  kSoftmax,
  kRelu,
  kGelu,
  kTanh,
  kSigmoid,
  kReshape,
  kPermute3,
  kQuantizeSte,
  kComplexMulConst,
  kMseLoss,
  kMaskedMseLoss,
};

const char* op_name(OpKind op);

// Forward quantizer behaviour. kHard snaps to the 4-level set; kTransparent
// substitutes clip(v, -4, 4) so finite differences of the surrounding graph
// match the straight-through backward exactly (gradient-check mode).
enum class QuantizeMode : uint8_t { kHard, kTransparent };

struct OpAttrs {
  int stride = 1;
  int pad = 0;
  bool trans_b = false;
  double scale = 1.0;
  double eps = 1e-5;
  QuantizeMode qmode = QuantizeMode::kHard;
  std::array<int, 3> perm{0, 1, 2};
  long long n_total = 0;
  long long n_unmasked = 0;
};

template <typename T>
struct Node {
  OpKind op = OpKind::kConst;
  std::vector<NodeId> inputs;
  OpAttrs attrs;
  Tensor<T> value;
  Tensor<T> grad;       // per-backward-pass gradient
  Tensor<T> grad_acc;   // params only: accumulated across backward passes
  std::string name;
  bool needs_grad = false;
};

// Reverse-mode autodiff over a static tape of dense-tensor primitives.
// Nodes are appended in topological order (an op may only consume existing
// node ids), so the tape is acyclic by construction; invalid ids are rejected.
// Typical use: build once, then per step set_value() on inputs/constants,
// forward(), backward(), and consume parameter gradients.
template <typename T>
class Graph {
 public:
  // --- leaves ---
  NodeId input(std::vector<int> shape, std::string name);
  NodeId param(Tensor<T> init, std::string name);
  // non-trainable leaf (targets, masks, frozen channel realizations)
  NodeId constant(Tensor<T> value, std::string name = "");

  // --- primitives ---
  NodeId add(NodeId a, NodeId b);                  // same shape
  NodeId mul(NodeId a, NodeId b);                  // elementwise, same shape
  NodeId add_bias(NodeId x, NodeId b);             // x[..,D] + b[D]
  NodeId scale(NodeId x, double c);
  NodeId matmul(NodeId a, NodeId b, bool trans_b = false);        // [m,k]x[k,n]
  NodeId batch_matmul(NodeId a, NodeId b, bool trans_b = false);  // [B,m,k]x[B,k,n]
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int pad);
  NodeId conv2d_transpose(NodeId x, NodeId w, NodeId b, int stride, int pad);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId softmax(NodeId x);  // last dim
  NodeId relu(NodeId x);
  NodeId gelu(NodeId x);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId reshape(NodeId x, std::vector<int> shape);
  NodeId permute3(NodeId x, std::array<int, 3> perm);
  NodeId quantize_ste(NodeId x, QuantizeMode mode = QuantizeMode::kHard);
  // interleaved-pair complex multiply by a constant vector node
  NodeId complex_mul_const(NodeId x, NodeId coeffs);
  NodeId mse_loss(NodeId pred, NodeId target);
  NodeId masked_mse_loss(NodeId pred, NodeId target, NodeId mask,
                         long long n_total, long long n_unmasked);

  // --- execution ---
  void set_value(NodeId id, const Tensor<T>& v);
  void set_value(NodeId id, const std::vector<T>& flat);
  // per-sample patch accounting on a masked_mse_loss node
  void set_masked_counts(NodeId id, long long n_total, long long n_unmasked);
  // switch a quantizer node between hard and clip-surrogate forwards
  void set_quantize_mode(NodeId id, QuantizeMode mode);
  T forward(NodeId output);               // runs the tape up to `output`
  void backward(NodeId loss);             // seeds 1 at scalar `loss`, accumulates param grads

  const Tensor<T>& value(NodeId id) const { return nodes_[check(id)].value; }
  const Tensor<T>& param_grad(NodeId id) const;
  Tensor<T>& mutable_value(NodeId id) { return nodes_[check(id)].value; }
  void zero_param_grads();
  void scale_param_grads(T factor);

  const std::vector<NodeId>& params() const { return params_; }
  const std::string& name(NodeId id) const { return nodes_[check(id)].name; }
  size_t size() const { return nodes_.size(); }

 private:
  NodeId add_node(OpKind op, std::vector<NodeId> inputs, OpAttrs attrs,
                  std::vector<int> out_shape, std::string name = "");
  size_t check(NodeId id) const;
  void compute(Node<T>& n);
  void propagate(Node<T>& n);

  std::vector<Node<T>> nodes_;
  std::vector<NodeId> params_;
};

// Standalone straight-through quantizer (forward rule shared with the graph
// node): nearest level in {-3,-1,1,3}, thresholds -2/0/2, ties toward the
// larger level.
template <typename T>
T quantize_level(T v) {
  if (v < T(-2)) return T(-3);
  if (v < T(0)) return T(-1);
  if (v < T(2)) return T(1);
  return T(3);
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace semlink::nn

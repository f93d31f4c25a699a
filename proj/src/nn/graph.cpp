#include "semlink/nn/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace semlink::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// C[m,n] += A x B with A/B optionally transposed in storage.
//   NN: A[m,k], B[k,n]   NT: A[m,k], B[n,k]   TN: A[k,m], B[k,n]
enum class Mm { NN, NT, TN };

template <typename T>
void gemm_acc(Mm mode, int m, int n, int k, const T* a, const T* b, T* c) {
  switch (mode) {
    case Mm::NN:
      for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<size_t>(i) * n;
        const T* arow = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
          const T av = arow[p];
          if (av == T(0)) continue;
          const T* brow = b + static_cast<size_t>(p) * n;
          for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
      break;
    case Mm::NT:
      for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          const T* brow = b + static_cast<size_t>(j) * k;
          T acc = 0;
          for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
          crow[j] += acc;
        }
      }
      break;
    case Mm::TN:
      for (int p = 0; p < k; ++p) {
        const T* arow = a + static_cast<size_t>(p) * m;
        const T* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
          const T av = arow[i];
          if (av == T(0)) continue;
          T* crow = c + static_cast<size_t>(i) * n;
          for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
      break;
  }
}

int conv_out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kInput: return "input";
    case OpKind::kParam: return "param";
    case OpKind::kConst: return "const";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kScale: return "scale";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kBatchMatmul: return "batch_matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kConvTranspose2d: return "conv2d_transpose";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kRelu: return "relu";
    case OpKind::kGelu: return "gelu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kReshape: return "reshape";
    case OpKind::kPermute3: return "permute3";
    case OpKind::kQuantizeSte: return "quantize_ste";
    case OpKind::kComplexMulConst: return "complex_mul_const";
    case OpKind::kMseLoss: return "mse_loss";
    case OpKind::kMaskedMseLoss: return "masked_mse_loss";
  }
  return "?";
}

template <typename T>
size_t Graph<T>::check(NodeId id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
    throw std::invalid_argument("graph: node id " + std::to_string(id) +
                                " out of range (tape has " + std::to_string(nodes_.size()) +
                                " nodes); only already-built nodes may be referenced");
  return static_cast<size_t>(id);
}

template <typename T>
NodeId Graph<T>::add_node(OpKind op, std::vector<NodeId> inputs, OpAttrs attrs,
                          std::vector<int> out_shape, std::string name) {
  Node<T> n;
  n.op = op;
  n.attrs = attrs;
  n.name = std::move(name);
  n.value = Tensor<T>(std::move(out_shape));
  n.grad = Tensor<T>(n.value.shape);
  for (NodeId in : inputs) {
    check(in);
    if (nodes_[static_cast<size_t>(in)].needs_grad) n.needs_grad = true;
  }
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
NodeId Graph<T>::input(std::vector<int> shape, std::string name) {
  return add_node(OpKind::kInput, {}, {}, std::move(shape), std::move(name));
}

template <typename T>
NodeId Graph<T>::param(Tensor<T> init, std::string name) {
  NodeId id = add_node(OpKind::kParam, {}, {}, init.shape, std::move(name));
  Node<T>& n = nodes_.back();
  n.value = std::move(init);
  n.grad_acc = Tensor<T>(n.value.shape);
  n.needs_grad = true;
  params_.push_back(id);
  return id;
}

template <typename T>
NodeId Graph<T>::constant(Tensor<T> value, std::string name) {
  NodeId id = add_node(OpKind::kConst, {}, {}, value.shape, std::move(name));
  nodes_.back().value = std::move(value);
  return id;
}

#define SL_NODE_ERR(msg) \
  throw std::invalid_argument(std::string("graph node ") + std::to_string(nodes_.size()) + \
                              " (" + op_name(op) + "): " + (msg))

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  constexpr OpKind op = OpKind::kAdd;
  const auto& ta = nodes_[check(a)].value;
  const auto& tb = nodes_[check(b)].value;
  if (!ta.same_shape(tb))
    SL_NODE_ERR("shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  return add_node(op, {a, b}, {}, ta.shape);
}

template <typename T>
NodeId Graph<T>::mul(NodeId a, NodeId b) {
  constexpr OpKind op = OpKind::kMul;
  const auto& ta = nodes_[check(a)].value;
  const auto& tb = nodes_[check(b)].value;
  if (!ta.same_shape(tb))
    SL_NODE_ERR("shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  return add_node(op, {a, b}, {}, ta.shape);
}

template <typename T>
NodeId Graph<T>::add_bias(NodeId x, NodeId b) {
  constexpr OpKind op = OpKind::kAddBias;
  const auto& tx = nodes_[check(x)].value;
  const auto& tb = nodes_[check(b)].value;
  if (tb.rank() != 1 || tx.rank() < 1 || tx.shape.back() != tb.shape[0])
    SL_NODE_ERR("bias " + shape_str(tb.shape) + " does not match last dim of " +
                shape_str(tx.shape));
  return add_node(op, {x, b}, {}, tx.shape);
}

template <typename T>
NodeId Graph<T>::scale(NodeId x, double c) {
  OpAttrs at;
  at.scale = c;
  return add_node(OpKind::kScale, {x}, at, nodes_[check(x)].value.shape);
}

template <typename T>
NodeId Graph<T>::matmul(NodeId a, NodeId b, bool trans_b) {
  constexpr OpKind op = OpKind::kMatmul;
  const auto& ta = nodes_[check(a)].value;
  const auto& tb = nodes_[check(b)].value;
  if (ta.rank() != 2 || tb.rank() != 2)
    SL_NODE_ERR("expects rank-2 operands, got " + shape_str(ta.shape) + " and " +
                shape_str(tb.shape));
  int k = ta.shape[1];
  int kb = trans_b ? tb.shape[1] : tb.shape[0];
  int n = trans_b ? tb.shape[0] : tb.shape[1];
  if (k != kb)
    SL_NODE_ERR("inner dims differ: " + shape_str(ta.shape) + " x " + shape_str(tb.shape) +
                (trans_b ? " (b transposed)" : ""));
  OpAttrs at;
  at.trans_b = trans_b;
  return add_node(op, {a, b}, at, {ta.shape[0], n});
}

template <typename T>
NodeId Graph<T>::batch_matmul(NodeId a, NodeId b, bool trans_b) {
  constexpr OpKind op = OpKind::kBatchMatmul;
  const auto& ta = nodes_[check(a)].value;
  const auto& tb = nodes_[check(b)].value;
  if (ta.rank() != 3 || tb.rank() != 3 || ta.shape[0] != tb.shape[0])
    SL_NODE_ERR("expects rank-3 operands with equal batch, got " + shape_str(ta.shape) +
                " and " + shape_str(tb.shape));
  int k = ta.shape[2];
  int kb = trans_b ? tb.shape[2] : tb.shape[1];
  int n = trans_b ? tb.shape[1] : tb.shape[2];
  if (k != kb)
    SL_NODE_ERR("inner dims differ: " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
  OpAttrs at;
  at.trans_b = trans_b;
  return add_node(op, {a, b}, at, {ta.shape[0], ta.shape[1], n});
}

template <typename T>
NodeId Graph<T>::conv2d(NodeId x, NodeId w, NodeId b, int stride, int pad) {
  constexpr OpKind op = OpKind::kConv2d;
  const auto& tx = nodes_[check(x)].value;
  const auto& tw = nodes_[check(w)].value;
  const auto& tb = nodes_[check(b)].value;
  if (tx.rank() != 3 || tw.rank() != 4)
    SL_NODE_ERR("expects x[C,H,W], w[Co,Ci,kh,kw], got " + shape_str(tx.shape) + " and " +
                shape_str(tw.shape));
  if (tw.shape[1] != tx.shape[0])
    SL_NODE_ERR("input channels " + std::to_string(tx.shape[0]) + " vs weight " +
                std::to_string(tw.shape[1]));
  if (tb.rank() != 1 || tb.shape[0] != tw.shape[0]) SL_NODE_ERR("bias must be [Co]");
  int ho = conv_out_dim(tx.shape[1], tw.shape[2], stride, pad);
  int wo = conv_out_dim(tx.shape[2], tw.shape[3], stride, pad);
  if (ho <= 0 || wo <= 0) SL_NODE_ERR("kernel larger than padded input");
  OpAttrs at;
  at.stride = stride;
  at.pad = pad;
  return add_node(op, {x, w, b}, at, {tw.shape[0], ho, wo});
}

template <typename T>
NodeId Graph<T>::conv2d_transpose(NodeId x, NodeId w, NodeId b, int stride, int pad) {
  constexpr OpKind op = OpKind::kConvTranspose2d;
  const auto& tx = nodes_[check(x)].value;
  const auto& tw = nodes_[check(w)].value;
  const auto& tb = nodes_[check(b)].value;
  if (tx.rank() != 3 || tw.rank() != 4)
    SL_NODE_ERR("expects x[C,H,W], w[Ci,Co,kh,kw], got " + shape_str(tx.shape) + " and " +
                shape_str(tw.shape));
  if (tw.shape[0] != tx.shape[0])
    SL_NODE_ERR("input channels " + std::to_string(tx.shape[0]) + " vs weight " +
                std::to_string(tw.shape[0]));
  if (tb.rank() != 1 || tb.shape[0] != tw.shape[1]) SL_NODE_ERR("bias must be [Co]");
  int ho = (tx.shape[1] - 1) * stride + tw.shape[2] - 2 * pad;
  int wo = (tx.shape[2] - 1) * stride + tw.shape[3] - 2 * pad;
  if (ho <= 0 || wo <= 0) SL_NODE_ERR("degenerate output size");
  OpAttrs at;
  at.stride = stride;
  at.pad = pad;
  return add_node(op, {x, w, b}, at, {tw.shape[1], ho, wo});
}

template <typename T>
NodeId Graph<T>::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  constexpr OpKind op = OpKind::kLayerNorm;
  const auto& tx = nodes_[check(x)].value;
  const auto& tg = nodes_[check(gain)].value;
  const auto& tb = nodes_[check(bias)].value;
  int d = tx.shape.back();
  if (tg.rank() != 1 || tb.rank() != 1 || tg.shape[0] != d || tb.shape[0] != d)
    SL_NODE_ERR("gain/bias must be [" + std::to_string(d) + "]");
  OpAttrs at;
  at.eps = eps;
  return add_node(op, {x, gain, bias}, at, tx.shape);
}

template <typename T>
NodeId Graph<T>::softmax(NodeId x) {
  return add_node(OpKind::kSoftmax, {x}, {}, nodes_[check(x)].value.shape);
}

template <typename T>
NodeId Graph<T>::relu(NodeId x) {
  return add_node(OpKind::kRelu, {x}, {}, nodes_[check(x)].value.shape);
}

template <typename T>
NodeId Graph<T>::gelu(NodeId x) {
  return add_node(OpKind::kGelu, {x}, {}, nodes_[check(x)].value.shape);
}

template <typename T>
NodeId Graph<T>::tanh(NodeId x) {
  return add_node(OpKind::kTanh, {x}, {}, nodes_[check(x)].value.shape);
}

template <typename T>
NodeId Graph<T>::sigmoid(NodeId x) {
  return add_node(OpKind::kSigmoid, {x}, {}, nodes_[check(x)].value.shape);
}

template <typename T>
NodeId Graph<T>::reshape(NodeId x, std::vector<int> shape) {
  constexpr OpKind op = OpKind::kReshape;
  const auto& tx = nodes_[check(x)].value;
  if (numel_of(shape) != tx.numel())
    SL_NODE_ERR("cannot reshape " + shape_str(tx.shape) + " to " + shape_str(shape));
  return add_node(op, {x}, {}, std::move(shape));
}

template <typename T>
NodeId Graph<T>::permute3(NodeId x, std::array<int, 3> perm) {
  constexpr OpKind op = OpKind::kPermute3;
  const auto& tx = nodes_[check(x)].value;
  if (tx.rank() != 3) SL_NODE_ERR("expects rank-3 input, got " + shape_str(tx.shape));
  bool seen[3] = {false, false, false};
  for (int p : perm) {
    if (p < 0 || p > 2 || seen[p]) SL_NODE_ERR("invalid permutation");
    seen[p] = true;
  }
  OpAttrs at;
  at.perm = perm;
  return add_node(op, {x}, at,
                  {tx.shape[static_cast<size_t>(perm[0])], tx.shape[static_cast<size_t>(perm[1])],
                   tx.shape[static_cast<size_t>(perm[2])]});
}

template <typename T>
NodeId Graph<T>::quantize_ste(NodeId x, QuantizeMode mode) {
  OpAttrs at;
  at.qmode = mode;
  return add_node(OpKind::kQuantizeSte, {x}, at, nodes_[check(x)].value.shape);
}

template <typename T>
NodeId Graph<T>::complex_mul_const(NodeId x, NodeId coeffs) {
  constexpr OpKind op = OpKind::kComplexMulConst;
  const auto& tx = nodes_[check(x)].value;
  const auto& tc = nodes_[check(coeffs)].value;
  if (tx.numel() % 2 != 0 || tx.numel() != tc.numel())
    SL_NODE_ERR("x and coeffs must be equal even-length vectors");
  if (nodes_[static_cast<size_t>(coeffs)].needs_grad)
    SL_NODE_ERR("coefficients must be a constant node");
  return add_node(op, {x, coeffs}, {}, tx.shape);
}

template <typename T>
NodeId Graph<T>::mse_loss(NodeId pred, NodeId target) {
  constexpr OpKind op = OpKind::kMseLoss;
  const auto& tp = nodes_[check(pred)].value;
  const auto& tt = nodes_[check(target)].value;
  if (!tp.same_shape(tt))
    SL_NODE_ERR("shape mismatch " + shape_str(tp.shape) + " vs " + shape_str(tt.shape));
  return add_node(op, {pred, target}, {}, {1});
}

template <typename T>
NodeId Graph<T>::masked_mse_loss(NodeId pred, NodeId target, NodeId mask, long long n_total,
                                 long long n_unmasked) {
  constexpr OpKind op = OpKind::kMaskedMseLoss;
  const auto& tp = nodes_[check(pred)].value;
  const auto& tt = nodes_[check(target)].value;
  const auto& tm = nodes_[check(mask)].value;
  if (!tp.same_shape(tt) || !tp.same_shape(tm))
    SL_NODE_ERR("pred/target/mask shapes differ: " + shape_str(tp.shape) + ", " +
                shape_str(tt.shape) + ", " + shape_str(tm.shape));
  if (n_unmasked < 1) SL_NODE_ERR("n_unmasked must be >= 1 (degenerate all-masked input)");
  OpAttrs at;
  at.n_total = n_total;
  at.n_unmasked = n_unmasked;
  return add_node(op, {pred, target, mask}, at, {1});
}

#undef SL_NODE_ERR

template <typename T>
void Graph<T>::set_value(NodeId id, const Tensor<T>& v) {
  Node<T>& n = nodes_[check(id)];
  if (n.op != OpKind::kInput && n.op != OpKind::kConst && n.op != OpKind::kParam)
    throw std::invalid_argument("graph: set_value on non-leaf node " + std::to_string(id));
  if (!n.value.same_shape(v))
    throw std::invalid_argument("graph: set_value shape " + shape_str(v.shape) +
                                " does not match node shape " + shape_str(n.value.shape));
  n.value.data = v.data;
}

template <typename T>
void Graph<T>::set_value(NodeId id, const std::vector<T>& flat) {
  Node<T>& n = nodes_[check(id)];
  if (flat.size() != n.value.numel())
    throw std::invalid_argument("graph: set_value length " + std::to_string(flat.size()) +
                                " does not match node size " + std::to_string(n.value.numel()));
  n.value.data = flat;
}

template <typename T>
void Graph<T>::set_masked_counts(NodeId id, long long n_total, long long n_unmasked) {
  Node<T>& n = nodes_[check(id)];
  if (n.op != OpKind::kMaskedMseLoss)
    throw std::invalid_argument("graph: set_masked_counts on a non-masked-loss node");
  if (n_unmasked < 1)
    throw std::invalid_argument("graph: n_unmasked must be >= 1");
  n.attrs.n_total = n_total;
  n.attrs.n_unmasked = n_unmasked;
}

template <typename T>
void Graph<T>::set_quantize_mode(NodeId id, QuantizeMode mode) {
  Node<T>& n = nodes_[check(id)];
  if (n.op != OpKind::kQuantizeSte)
    throw std::invalid_argument("graph: set_quantize_mode on a non-quantizer node");
  n.attrs.qmode = mode;
}

template <typename T>
const Tensor<T>& Graph<T>::param_grad(NodeId id) const {
  const Node<T>& n = nodes_[check(id)];
  if (n.op != OpKind::kParam)
    throw std::invalid_argument("graph: param_grad on non-param node");
  return n.grad_acc;
}

template <typename T>
void Graph<T>::zero_param_grads() {
  for (NodeId id : params_) nodes_[static_cast<size_t>(id)].grad_acc.fill(T(0));
}

template <typename T>
void Graph<T>::scale_param_grads(T factor) {
  for (NodeId id : params_)
    for (auto& g : nodes_[static_cast<size_t>(id)].grad_acc.data) g *= factor;
}

template <typename T>
T Graph<T>::forward(NodeId output) {
  size_t last = check(output);
  for (size_t i = 0; i <= last; ++i) {
    Node<T>& n = nodes_[i];
    if (n.op == OpKind::kInput || n.op == OpKind::kParam || n.op == OpKind::kConst) continue;
    compute(n);
  }
  return nodes_[last].value[0];
}

template <typename T>
void Graph<T>::backward(NodeId loss) {
  size_t last = check(loss);
  if (nodes_[last].value.numel() != 1)
    throw std::invalid_argument("graph: backward target must be scalar");
  for (size_t i = 0; i <= last; ++i) nodes_[i].grad.fill(T(0));
  nodes_[last].grad[0] = T(1);
  for (size_t i = last + 1; i-- > 0;) {
    Node<T>& n = nodes_[i];
    if (!n.needs_grad) continue;
    switch (n.op) {
      case OpKind::kInput:
      case OpKind::kConst:
        break;
      case OpKind::kParam:
        for (size_t j = 0; j < n.grad.numel(); ++j) n.grad_acc[j] += n.grad[j];
        break;
      default:
        propagate(n);
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// forward kernels

template <typename T>
void Graph<T>::compute(Node<T>& n) {
  auto& y = n.value.data;
  auto in = [&](int i) -> const Tensor<T>& {
    return nodes_[static_cast<size_t>(n.inputs[static_cast<size_t>(i)])].value;
  };
  switch (n.op) {
    case OpKind::kAdd: {
      const auto& a = in(0).data;
      const auto& b = in(1).data;
      for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
      break;
    }
    case OpKind::kMul: {
      const auto& a = in(0).data;
      const auto& b = in(1).data;
      for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
      break;
    }
    case OpKind::kAddBias: {
      const auto& a = in(0).data;
      const auto& b = in(1).data;
      size_t d = b.size();
      for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i % d];
      break;
    }
    case OpKind::kScale: {
      const auto& a = in(0).data;
      const T c = static_cast<T>(n.attrs.scale);
      for (size_t i = 0; i < y.size(); ++i) y[i] = c * a[i];
      break;
    }
    case OpKind::kMatmul: {
      const auto& ta = in(0);
      const auto& tb = in(1);
      std::fill(y.begin(), y.end(), T(0));
      int m = ta.shape[0], k = ta.shape[1];
      int nn = n.value.shape[1];
      gemm_acc(n.attrs.trans_b ? Mm::NT : Mm::NN, m, nn, k, ta.data.data(), tb.data.data(),
               y.data());
      break;
    }
    case OpKind::kBatchMatmul: {
      const auto& ta = in(0);
      const auto& tb = in(1);
      std::fill(y.begin(), y.end(), T(0));
      int bsz = ta.shape[0], m = ta.shape[1], k = ta.shape[2];
      int nn = n.value.shape[2];
      size_t sa = static_cast<size_t>(m) * k;
      size_t sb = in(1).numel() / static_cast<size_t>(bsz);
      size_t sy = static_cast<size_t>(m) * nn;
      for (int q = 0; q < bsz; ++q)
        gemm_acc(n.attrs.trans_b ? Mm::NT : Mm::NN, m, nn, k, ta.data.data() + q * sa,
                 tb.data.data() + q * sb, y.data() + q * sy);
      break;
    }
    case OpKind::kConv2d: {
      const auto& tx = in(0);
      const auto& tw = in(1);
      const auto& tb = in(2);
      int ci = tx.shape[0], h = tx.shape[1], w = tx.shape[2];
      int co = tw.shape[0], kh = tw.shape[2], kw = tw.shape[3];
      int ho = n.value.shape[1], wo = n.value.shape[2];
      int s = n.attrs.stride, p = n.attrs.pad;
      for (int oc = 0; oc < co; ++oc) {
        T* yplane = y.data() + static_cast<size_t>(oc) * ho * wo;
        for (int i = 0; i < ho * wo; ++i) yplane[i] = tb.data[static_cast<size_t>(oc)];
        for (int ic = 0; ic < ci; ++ic) {
          const T* xplane = tx.data.data() + static_cast<size_t>(ic) * h * w;
          const T* wk = tw.data.data() + ((static_cast<size_t>(oc) * ci + ic) * kh) * kw;
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
              T acc = 0;
              int iy0 = oy * s - p, ix0 = ox * s - p;
              for (int ky = 0; ky < kh; ++ky) {
                int iy = iy0 + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  int ix = ix0 + kx;
                  if (ix < 0 || ix >= w) continue;
                  acc += xplane[iy * w + ix] * wk[ky * kw + kx];
                }
              }
              yplane[oy * wo + ox] += acc;
            }
        }
      }
      break;
    }
    case OpKind::kConvTranspose2d: {
      const auto& tx = in(0);
      const auto& tw = in(1);
      const auto& tb = in(2);
      int ci = tx.shape[0], h = tx.shape[1], w = tx.shape[2];
      int co = tw.shape[1], kh = tw.shape[2], kw = tw.shape[3];
      int ho = n.value.shape[1], wo = n.value.shape[2];
      int s = n.attrs.stride, p = n.attrs.pad;
      for (int oc = 0; oc < co; ++oc) {
        T* yplane = y.data() + static_cast<size_t>(oc) * ho * wo;
        for (int i = 0; i < ho * wo; ++i) yplane[i] = tb.data[static_cast<size_t>(oc)];
      }
      for (int ic = 0; ic < ci; ++ic) {
        const T* xplane = tx.data.data() + static_cast<size_t>(ic) * h * w;
        for (int oc = 0; oc < co; ++oc) {
          const T* wk = tw.data.data() + ((static_cast<size_t>(ic) * co + oc) * kh) * kw;
          T* yplane = y.data() + static_cast<size_t>(oc) * ho * wo;
          for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
              const T xv = xplane[iy * w + ix];
              if (xv == T(0)) continue;
              for (int ky = 0; ky < kh; ++ky) {
                int oy = iy * s + ky - p;
                if (oy < 0 || oy >= ho) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  int ox = ix * s + kx - p;
                  if (ox < 0 || ox >= wo) continue;
                  yplane[oy * wo + ox] += xv * wk[ky * kw + kx];
                }
              }
            }
        }
      }
      break;
    }
    case OpKind::kLayerNorm: {
      const auto& a = in(0).data;
      const auto& gain = in(1).data;
      const auto& bias = in(2).data;
      size_t d = gain.size();
      size_t rows = a.size() / d;
      const double eps = n.attrs.eps;
      for (size_t r = 0; r < rows; ++r) {
        const T* xr = a.data() + r * d;
        T* yr = y.data() + r * d;
        double mean = 0;
        for (size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0;
        for (size_t j = 0; j < d; ++j) {
          double c = xr[j] - mean;
          var += c * c;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + eps);
        for (size_t j = 0; j < d; ++j)
          yr[j] = static_cast<T>((xr[j] - mean) * inv) * gain[j] + bias[j];
      }
      break;
    }
    case OpKind::kSoftmax: {
      const auto& a = in(0).data;
      size_t d = static_cast<size_t>(n.value.shape.back());
      size_t rows = a.size() / d;
      for (size_t r = 0; r < rows; ++r) {
        const T* xr = a.data() + r * d;
        T* yr = y.data() + r * d;
        T mx = xr[0];
        for (size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
        double sum = 0;
        for (size_t j = 0; j < d; ++j) {
          double e = std::exp(static_cast<double>(xr[j] - mx));
          yr[j] = static_cast<T>(e);
          sum += e;
        }
        T inv = static_cast<T>(1.0 / sum);
        for (size_t j = 0; j < d; ++j) yr[j] *= inv;
      }
      break;
    }
    case OpKind::kRelu: {
      const auto& a = in(0).data;
      for (size_t i = 0; i < y.size(); ++i) y[i] = a[i] > T(0) ? a[i] : T(0);
      break;
    }
    case OpKind::kGelu: {
      const auto& a = in(0).data;
      for (size_t i = 0; i < y.size(); ++i) {
        double x = a[i];
        y[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
      }
      break;
    }
    case OpKind::kTanh: {
      const auto& a = in(0).data;
      for (size_t i = 0; i < y.size(); ++i) y[i] = static_cast<T>(std::tanh(a[i]));
      break;
    }
    case OpKind::kSigmoid: {
      const auto& a = in(0).data;
      for (size_t i = 0; i < y.size(); ++i)
        y[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(a[i]))));
      break;
    }
    case OpKind::kReshape: {
      y = in(0).data;
      break;
    }
    case OpKind::kPermute3: {
      const auto& tx = in(0);
      const auto& pm = n.attrs.perm;
      int od[3] = {n.value.shape[0], n.value.shape[1], n.value.shape[2]};
      size_t istr[3] = {static_cast<size_t>(tx.shape[1]) * tx.shape[2],
                        static_cast<size_t>(tx.shape[2]), 1};
      size_t s0 = istr[pm[0]], s1 = istr[pm[1]], s2 = istr[pm[2]];
      size_t idx = 0;
      for (int i = 0; i < od[0]; ++i)
        for (int j = 0; j < od[1]; ++j)
          for (int k = 0; k < od[2]; ++k)
            y[idx++] = tx.data[i * s0 + j * s1 + k * s2];
      break;
    }
    case OpKind::kQuantizeSte: {
      const auto& a = in(0).data;
      if (n.attrs.qmode == QuantizeMode::kHard) {
        for (size_t i = 0; i < y.size(); ++i) y[i] = quantize_level(a[i]);
      } else {
        for (size_t i = 0; i < y.size(); ++i)
          y[i] = std::min(std::max(a[i], T(-4)), T(4));
      }
      break;
    }
    case OpKind::kComplexMulConst: {
      const auto& a = in(0).data;
      const auto& c = in(1).data;
      for (size_t i = 0; i + 1 < a.size(); i += 2) {
        y[i] = c[i] * a[i] - c[i + 1] * a[i + 1];
        y[i + 1] = c[i + 1] * a[i] + c[i] * a[i + 1];
      }
      break;
    }
    case OpKind::kMseLoss: {
      const auto& p = in(0).data;
      const auto& t = in(1).data;
      double acc = 0;
      for (size_t i = 0; i < p.size(); ++i) {
        T d = p[i] - t[i];
        acc += static_cast<double>(d) * static_cast<double>(d);
      }
      y[0] = static_cast<T>(acc / static_cast<double>(p.size()));
      break;
    }
    case OpKind::kMaskedMseLoss: {
      const auto& p = in(0).data;
      const auto& t = in(1).data;
      const auto& m = in(2).data;
      double acc = 0;
      for (size_t i = 0; i < p.size(); ++i) {
        T d = p[i] * m[i] - t[i];
        acc += static_cast<double>(d) * static_cast<double>(d);
      }
      double ratio = static_cast<double>(n.attrs.n_total) / static_cast<double>(n.attrs.n_unmasked);
      y[0] = static_cast<T>(acc / static_cast<double>(p.size()) * ratio);
      break;
    }
    default:
      break;
  }
}

// ---------------------------------------------------------------------------
// backward kernels

template <typename T>
void Graph<T>::propagate(Node<T>& n) {
  const auto& g = n.grad.data;
  auto inv = [&](int i) -> const Tensor<T>& {
    return nodes_[static_cast<size_t>(n.inputs[static_cast<size_t>(i)])].value;
  };
  auto ing = [&](int i) -> Tensor<T>& {
    return nodes_[static_cast<size_t>(n.inputs[static_cast<size_t>(i)])].grad;
  };
  auto wants = [&](int i) {
    return nodes_[static_cast<size_t>(n.inputs[static_cast<size_t>(i)])].needs_grad;
  };
  switch (n.op) {
    case OpKind::kAdd: {
      if (wants(0)) {
        auto& da = ing(0).data;
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (wants(1)) {
        auto& db = ing(1).data;
        for (size_t i = 0; i < g.size(); ++i) db[i] += g[i];
      }
      break;
    }
    case OpKind::kMul: {
      const auto& a = inv(0).data;
      const auto& b = inv(1).data;
      if (wants(0)) {
        auto& da = ing(0).data;
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto& db = ing(1).data;
        for (size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
      }
      break;
    }
    case OpKind::kAddBias: {
      if (wants(0)) {
        auto& da = ing(0).data;
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (wants(1)) {
        auto& db = ing(1).data;
        size_t d = db.size();
        for (size_t i = 0; i < g.size(); ++i) db[i % d] += g[i];
      }
      break;
    }
    case OpKind::kScale: {
      if (wants(0)) {
        auto& da = ing(0).data;
        const T c = static_cast<T>(n.attrs.scale);
        for (size_t i = 0; i < g.size(); ++i) da[i] += c * g[i];
      }
      break;
    }
    case OpKind::kMatmul: {
      const auto& ta = inv(0);
      const auto& tb = inv(1);
      int m = ta.shape[0], k = ta.shape[1], nn = n.value.shape[1];
      if (!n.attrs.trans_b) {
        // y = A.B : dA += G.B^T, dB += A^T.G
        if (wants(0))
          gemm_acc(Mm::NT, m, k, nn, g.data(), tb.data.data(), ing(0).data.data());
        if (wants(1))
          gemm_acc(Mm::TN, k, nn, m, ta.data.data(), g.data(), ing(1).data.data());
      } else {
        // y = A.B^T : dA += G.B, dB += G^T.A
        if (wants(0))
          gemm_acc(Mm::NN, m, k, nn, g.data(), tb.data.data(), ing(0).data.data());
        if (wants(1))
          gemm_acc(Mm::TN, nn, k, m, g.data(), ta.data.data(), ing(1).data.data());
      }
      break;
    }
    case OpKind::kBatchMatmul: {
      const auto& ta = inv(0);
      const auto& tb = inv(1);
      int bsz = ta.shape[0], m = ta.shape[1], k = ta.shape[2], nn = n.value.shape[2];
      size_t sa = static_cast<size_t>(m) * k;
      size_t sb = tb.numel() / static_cast<size_t>(bsz);
      size_t sy = static_cast<size_t>(m) * nn;
      for (int q = 0; q < bsz; ++q) {
        const T* gq = g.data() + q * sy;
        const T* aq = ta.data.data() + q * sa;
        const T* bq = tb.data.data() + q * sb;
        if (!n.attrs.trans_b) {
          if (wants(0)) gemm_acc(Mm::NT, m, k, nn, gq, bq, ing(0).data.data() + q * sa);
          if (wants(1)) gemm_acc(Mm::TN, k, nn, m, aq, gq, ing(1).data.data() + q * sb);
        } else {
          if (wants(0)) gemm_acc(Mm::NN, m, k, nn, gq, bq, ing(0).data.data() + q * sa);
          if (wants(1)) gemm_acc(Mm::TN, nn, k, m, gq, aq, ing(1).data.data() + q * sb);
        }
      }
      break;
    }
    case OpKind::kConv2d: {
      const auto& tx = inv(0);
      const auto& tw = inv(1);
      int ci = tx.shape[0], h = tx.shape[1], w = tx.shape[2];
      int co = tw.shape[0], kh = tw.shape[2], kw = tw.shape[3];
      int ho = n.value.shape[1], wo = n.value.shape[2];
      int s = n.attrs.stride, p = n.attrs.pad;
      for (int oc = 0; oc < co; ++oc) {
        const T* gplane = g.data() + static_cast<size_t>(oc) * ho * wo;
        if (wants(2)) {
          T acc = 0;
          for (int i = 0; i < ho * wo; ++i) acc += gplane[i];
          ing(2).data[static_cast<size_t>(oc)] += acc;
        }
        for (int ic = 0; ic < ci; ++ic) {
          const T* xplane = tx.data.data() + static_cast<size_t>(ic) * h * w;
          const T* wk = tw.data.data() + ((static_cast<size_t>(oc) * ci + ic) * kh) * kw;
          T* dx = wants(0) ? ing(0).data.data() + static_cast<size_t>(ic) * h * w : nullptr;
          T* dw = wants(1)
                      ? ing(1).data.data() + ((static_cast<size_t>(oc) * ci + ic) * kh) * kw
                      : nullptr;
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
              const T gv = gplane[oy * wo + ox];
              if (gv == T(0)) continue;
              int iy0 = oy * s - p, ix0 = ox * s - p;
              for (int ky = 0; ky < kh; ++ky) {
                int iy = iy0 + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  int ix = ix0 + kx;
                  if (ix < 0 || ix >= w) continue;
                  if (dx) dx[iy * w + ix] += gv * wk[ky * kw + kx];
                  if (dw) dw[ky * kw + kx] += gv * xplane[iy * w + ix];
                }
              }
            }
        }
      }
      break;
    }
    case OpKind::kConvTranspose2d: {
      const auto& tx = inv(0);
      const auto& tw = inv(1);
      int ci = tx.shape[0], h = tx.shape[1], w = tx.shape[2];
      int co = tw.shape[1], kh = tw.shape[2], kw = tw.shape[3];
      int ho = n.value.shape[1], wo = n.value.shape[2];
      int s = n.attrs.stride, p = n.attrs.pad;
      if (wants(2)) {
        for (int oc = 0; oc < co; ++oc) {
          const T* gplane = g.data() + static_cast<size_t>(oc) * ho * wo;
          T acc = 0;
          for (int i = 0; i < ho * wo; ++i) acc += gplane[i];
          ing(2).data[static_cast<size_t>(oc)] += acc;
        }
      }
      for (int ic = 0; ic < ci; ++ic) {
        const T* xplane = tx.data.data() + static_cast<size_t>(ic) * h * w;
        T* dx = wants(0) ? ing(0).data.data() + static_cast<size_t>(ic) * h * w : nullptr;
        for (int oc = 0; oc < co; ++oc) {
          const T* gplane = g.data() + static_cast<size_t>(oc) * ho * wo;
          const T* wk = tw.data.data() + ((static_cast<size_t>(ic) * co + oc) * kh) * kw;
          T* dw = wants(1)
                      ? ing(1).data.data() + ((static_cast<size_t>(ic) * co + oc) * kh) * kw
                      : nullptr;
          for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
              T accx = 0;
              const T xv = xplane[iy * w + ix];
              for (int ky = 0; ky < kh; ++ky) {
                int oy = iy * s + ky - p;
                if (oy < 0 || oy >= ho) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  int ox = ix * s + kx - p;
                  if (ox < 0 || ox >= wo) continue;
                  const T gv = gplane[oy * wo + ox];
                  accx += gv * wk[ky * kw + kx];
                  if (dw) dw[ky * kw + kx] += gv * xv;
                }
              }
              if (dx) dx[iy * w + ix] += accx;
            }
        }
      }
      break;
    }
    case OpKind::kLayerNorm: {
      const auto& a = inv(0).data;
      const auto& gain = inv(1).data;
      size_t d = gain.size();
      size_t rows = a.size() / d;
      const double eps = n.attrs.eps;
      for (size_t r = 0; r < rows; ++r) {
        const T* xr = a.data() + r * d;
        const T* gr = g.data() + r * d;
        double mean = 0;
        for (size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0;
        for (size_t j = 0; j < d; ++j) {
          double c = xr[j] - mean;
          var += c * c;
        }
        var /= static_cast<double>(d);
        double inv_std = 1.0 / std::sqrt(var + eps);
        // dxhat = g * gain; accumulate the two row sums needed for dx
        double sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (size_t j = 0; j < d; ++j) {
          double xhat = (xr[j] - mean) * inv_std;
          double dxhat = static_cast<double>(gr[j]) * gain[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          if (wants(1)) ing(1).data[j] += static_cast<T>(gr[j] * xhat);
          if (wants(2)) ing(2).data[j] += gr[j];
        }
        if (wants(0)) {
          T* dxr = ing(0).data.data() + r * d;
          double dn = static_cast<double>(d);
          for (size_t j = 0; j < d; ++j) {
            double xhat = (xr[j] - mean) * inv_std;
            double dxhat = static_cast<double>(gr[j]) * gain[j];
            dxr[j] += static_cast<T>(inv_std * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn));
          }
        }
      }
      break;
    }
    case OpKind::kSoftmax: {
      if (!wants(0)) break;
      const auto& yv = n.value.data;
      auto& dx = ing(0).data;
      size_t d = static_cast<size_t>(n.value.shape.back());
      size_t rows = yv.size() / d;
      for (size_t r = 0; r < rows; ++r) {
        const T* yr = yv.data() + r * d;
        const T* gr = g.data() + r * d;
        double dot = 0;
        for (size_t j = 0; j < d; ++j) dot += static_cast<double>(gr[j]) * yr[j];
        T* dxr = dx.data() + r * d;
        for (size_t j = 0; j < d; ++j)
          dxr[j] += static_cast<T>((static_cast<double>(gr[j]) - dot) * yr[j]);
      }
      break;
    }
    case OpKind::kRelu: {
      if (!wants(0)) break;
      const auto& a = inv(0).data;
      auto& dx = ing(0).data;
      for (size_t i = 0; i < g.size(); ++i)
        if (a[i] > T(0)) dx[i] += g[i];
      break;
    }
    case OpKind::kGelu: {
      if (!wants(0)) break;
      const auto& a = inv(0).data;
      auto& dx = ing(0).data;
      for (size_t i = 0; i < g.size(); ++i) {
        double x = a[i];
        double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        dx[i] += static_cast<T>(g[i] * (cdf + x * pdf));
      }
      break;
    }
    case OpKind::kTanh: {
      if (!wants(0)) break;
      const auto& yv = n.value.data;
      auto& dx = ing(0).data;
      for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (T(1) - yv[i] * yv[i]);
      break;
    }
    case OpKind::kSigmoid: {
      if (!wants(0)) break;
      const auto& yv = n.value.data;
      auto& dx = ing(0).data;
      for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * yv[i] * (T(1) - yv[i]);
      break;
    }
    case OpKind::kReshape: {
      if (!wants(0)) break;
      auto& dx = ing(0).data;
      for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      break;
    }
    case OpKind::kPermute3: {
      if (!wants(0)) break;
      const auto& tx = inv(0);
      auto& dx = ing(0).data;
      const auto& pm = n.attrs.perm;
      int od[3] = {n.value.shape[0], n.value.shape[1], n.value.shape[2]};
      size_t istr[3] = {static_cast<size_t>(tx.shape[1]) * tx.shape[2],
                        static_cast<size_t>(tx.shape[2]), 1};
      size_t s0 = istr[pm[0]], s1 = istr[pm[1]], s2 = istr[pm[2]];
      size_t idx = 0;
      for (int i = 0; i < od[0]; ++i)
        for (int j = 0; j < od[1]; ++j)
          for (int k = 0; k < od[2]; ++k)
            dx[i * s0 + j * s1 + k * s2] += g[idx++];
      break;
    }
    case OpKind::kQuantizeSte: {
      if (!wants(0)) break;
      const auto& a = inv(0).data;
      auto& dx = ing(0).data;
      for (size_t i = 0; i < g.size(); ++i)
        if (a[i] >= T(-4) && a[i] <= T(4)) dx[i] += g[i];
      break;
    }
    case OpKind::kComplexMulConst: {
      if (!wants(0)) break;
      const auto& c = inv(1).data;
      auto& dx = ing(0).data;
      for (size_t i = 0; i + 1 < g.size(); i += 2) {
        dx[i] += c[i] * g[i] + c[i + 1] * g[i + 1];
        dx[i + 1] += -c[i + 1] * g[i] + c[i] * g[i + 1];
      }
      break;
    }
    case OpKind::kMseLoss: {
      const auto& p = inv(0).data;
      const auto& t = inv(1).data;
      const T gv = g[0];
      const T two_over_m = static_cast<T>(2.0 / static_cast<double>(p.size()));
      if (wants(0)) {
        auto& dp = ing(0).data;
        for (size_t i = 0; i < p.size(); ++i) dp[i] += gv * two_over_m * (p[i] - t[i]);
      }
      if (wants(1)) {
        auto& dt = ing(1).data;
        for (size_t i = 0; i < p.size(); ++i) dt[i] += gv * two_over_m * (t[i] - p[i]);
      }
      break;
    }
    case OpKind::kMaskedMseLoss: {
      const auto& p = inv(0).data;
      const auto& t = inv(1).data;
      const auto& m = inv(2).data;
      const T gv = g[0];
      const double ratio =
          static_cast<double>(n.attrs.n_total) / static_cast<double>(n.attrs.n_unmasked);
      const T k = static_cast<T>(2.0 / static_cast<double>(p.size()) * ratio);
      if (wants(0)) {
        auto& dp = ing(0).data;
        for (size_t i = 0; i < p.size(); ++i)
          dp[i] += gv * k * (p[i] * m[i] - t[i]) * m[i];
      }
      break;
    }
    default:
      break;
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace semlink::nn

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hearken/tensor.hpp"

namespace hearken {

// Reverse-mode automatic differentiation over a per-step tape.
//
// Nodes are appended in construction order, which is therefore a topological
// order: every input id precedes its consumers. backward() walks the tape in
// reverse and accumulates (sums) gradients across fan-out. A fresh Graph is
// built for every training step, so gradient buffers never leak between
// steps. Construction is single-threaded; the finished tape is read-only.
class Graph {
 public:
  using NodeId = std::int32_t;
  static constexpr NodeId kInvalidNode = -1;

  enum class Op {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kAddRowVec,
    kScale,
    kOneMinus,
    kMatmul,
    kTranspose,
    kSigmoid,
    kGelu,
    kLayerNorm,
    kSoftmaxRows,
    kCrossEntropy,
    kBceWithLogits,
    kSliceRows,
    kPasteRows,
    kSliceCols,
    kConcatCols,
    kGatherRows,
    kMeanPoolRows,
    kAddN,
  };

  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId constant(Tensor value) { return leaf(std::move(value), false); }

  // elementwise, identical shapes
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  // mat[m x n] + vec[n] broadcast over rows
  NodeId add_rowvec(NodeId mat, NodeId vec);
  NodeId scale(NodeId x, double c);
  NodeId one_minus(NodeId x);

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId x);

  NodeId sigmoid(NodeId x);
  NodeId gelu(NodeId x);
  // normalizes the last axis to mean 0 / variance 1, then applies gain/bias
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps);
  NodeId softmax_rows(NodeId x);

  // mean over rows of -log softmax(logits)[label]; scalar output
  NodeId cross_entropy(NodeId logits, const std::vector<int>& labels);
  // mean binary cross-entropy over elements, computed from logits (stable)
  NodeId bce_with_logits(NodeId logits, const std::vector<double>& targets);

  // rows [r0, r1) of x
  NodeId slice_rows(NodeId x, int r0, int r1);
  // copy of base with patch written at row r0; untouched rows are bit-exact
  NodeId paste_rows(NodeId base, NodeId patch, int r0);
  NodeId slice_cols(NodeId x, int c0, int c1);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId gather_rows(NodeId table, const std::vector<int>& indices);
  // contiguous quasi-equal groups of rows, averaged; exact row count per
  // group g is [g*T/G, (g+1)*T/G)
  NodeId mean_pool_rows(NodeId x, int n_groups);
  NodeId add_n(std::span<const NodeId> terms);

  const Tensor& value(NodeId id) const;
  // Valid after backward(); zeros for nodes the loss never reached.
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const;
  Op op(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // loss must be a scalar node of this graph
  void backward(NodeId loss);

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;           // allocated on demand, same shape as value
    bool needs_grad = false;
    std::function<void(Graph&, NodeId)> backward;
  };

  NodeId push(Node node);
  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  Tensor& grad_buffer(NodeId id);
  bool any_needs_grad(std::span<const NodeId> ids) const;

  // deque keeps value()/grad() references stable while new nodes are pushed
  std::deque<Node> nodes_;
  mutable Tensor zero_scratch_;  // returned by grad() for untouched nodes
};

}  // namespace hearken

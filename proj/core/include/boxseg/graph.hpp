#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "boxseg/tensor.hpp"

namespace boxseg {

using NodeId = std::int32_t;

// Reverse-mode tape over dense double tensors. Nodes are appended in forward
// order; backward() walks them in exact reverse order, so the visit order is
// a valid reverse topological order by construction. All arithmetic is plain
// serial double arithmetic: replaying the same forward on the same inputs is
// bit-identical.
//
// Primitives cover what the segmentation network needs: conv2d, leaky_relu,
// sigmoid, bilinear upsampling, a dense layer, slicing and elementwise
// add/scale. Loss functions register their own fused nodes via custom().
class Graph {
 public:
  // Backward callbacks read grad(id) of their own node and accumulate into
  // the inputs' buffers via grad_buffer().
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  // Leaf holding a value. requires_grad marks trainable parameters; constant
  // leaves never allocate gradient storage and gradients are not propagated
  // into subtrees that contain only constants.
  NodeId input(Tensor value, bool requires_grad = false);

  // Zero-padded cross-correlation. input [C,H,W], kernel [K,C,kh,kw] with odd
  // kh,kw, bias [K], stride 1 or 2. Backward produces gradients for input,
  // kernel and bias.
  NodeId conv2d(NodeId input, NodeId kernel, NodeId bias, int stride, int pad);

  // max(x, slope*x) elementwise, slope in (0,1). Subgradient at exactly 0 is
  // the slope.
  NodeId leaky_relu(NodeId x, double slope);

  // Numerically stable logistic; backward uses y*(1-y).
  NodeId sigmoid(NodeId x);

  // Bilinear interpolation with half-pixel centers, out_h >= h, out_w >= w.
  // Linear map; backward is its transpose.
  NodeId upsample_bilinear(NodeId x, int out_h, int out_w);

  // w [m,n] * x [n] + b [m].
  NodeId linear(NodeId w, NodeId x, NodeId b);

  // Copy of x.data[offset .. offset+numel(shape)) viewed as `shape`.
  NodeId slice_view(NodeId x, int offset, std::vector<int> shape);

  NodeId add(NodeId a, NodeId b);        // same shape
  NodeId scale(NodeId x, double c);

  // Fused node with a caller-supplied backward rule (used by the losses).
  NodeId custom(const char* tag, std::vector<NodeId> inputs, Tensor value,
                BackwardFn backward);

  // Seeds root (a scalar node) with gradient 1 and propagates through every
  // recorded node in reverse insertion order.
  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return node(id).value; }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }
  const std::vector<NodeId>& inputs(NodeId id) const { return node(id).inputs; }

  // nullptr when the node never received a gradient (treat as zeros).
  const std::vector<double>* grad(NodeId id) const;

  // Allocates a zero-filled buffer on first use. Backward rules use this to
  // accumulate into their inputs.
  std::vector<double>& grad_buffer(NodeId id);

  int size() const { return static_cast<int>(nodes_.size()); }
  const char* tag(NodeId id) const { return node(id).tag; }

 private:
  struct Node {
    const char* tag;
    std::vector<NodeId> inputs;
    Tensor value;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad;
    BackwardFn backward;
  };

  const Node& node(NodeId id) const;
  Node& node(NodeId id);
  bool any_requires_grad(const std::vector<NodeId>& ids) const;
  NodeId push(const char* tag, std::vector<NodeId> inputs, Tensor value,
              BackwardFn backward);

  std::vector<Node> nodes_;
};

}  // namespace boxseg

#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "boxseg/graph.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg {

// Small fully-convolutional encoder: four 3x3 convs with leaky-relu, two of
// them stride 2, so features come out at 1/4 the input resolution.
struct BackboneConfig {
  int in_channels = 1;
  std::array<int, 4> channels = {16, 32, 32, 16};
  std::array<int, 4> strides = {2, 1, 2, 1};
  double slope = 0.01;

  int head_channels() const { return channels[3]; }
};

struct BackboneParams {
  std::array<Tensor, 4> w;  // [c_out, c_in, 3, 3]
  std::array<Tensor, 4> b;  // [c_out]
};

// One segmentation head: 3x3 C->C, 3x3 C->C, 1x1 C->1, then bilinear
// upsample to the requested size and sigmoid. The weak, salient and
// transferred heads all share this shape.
struct HeadParams {
  Tensor w1, b1;  // [C,C,3,3], [C]
  Tensor w2, b2;  // [C,C,3,3], [C]
  Tensor w3, b3;  // [1,C,1,1], [1]
};

// Two-layer MLP mapping the flattened weak-head parameters to the
// transferred head's parameters. Hidden width is max(64, ceil(D/4)).
struct TransferMLP {
  Tensor W1, b1;  // [D_hidden, D], [D_hidden]
  Tensor W2, b2;  // [D, D_hidden], [D]
  double slope = 0.01;
};

int head_param_count(int channels);  // D = 18*C^2 + 3*C + 1
int transfer_hidden_dim(int d);      // max(64, ceil(d/4))

// He-style fan-in uniform init for weights, zero biases; the MLP's second
// layer is zero-initialized so the transferred head starts at sigmoid(0).
BackboneParams make_backbone(const BackboneConfig& cfg, Rng& rng);
HeadParams make_head(int channels, Rng& rng);
TransferMLP make_transfer_mlp(int d, double slope, Rng& rng);

// Flatten order: w1, b1, w2, b2, w3, b3.
std::vector<double> flatten_head(const HeadParams& p);
HeadParams unflatten_head(const std::vector<double>& flat, int channels);

// Eager transfer: unflatten(W2 * leaky_relu(W1 * flatten(weak) + b1) + b2).
std::vector<double> transfer_flat(const std::vector<double>& flat, const TransferMLP& mlp);
HeadParams weight_transfer(const HeadParams& weak, const TransferMLP& mlp);

// Graph-bound parameter handles.
struct BackboneNodes {
  std::array<NodeId, 4> w;
  std::array<NodeId, 4> b;
};
struct HeadNodes {
  NodeId w1, b1, w2, b2, w3, b3;
};
struct MlpNodes {
  NodeId W1, b1, W2, b2;
};

BackboneNodes bind_backbone(Graph& g, const BackboneParams& p, bool requires_grad);
HeadNodes bind_head(Graph& g, const HeadParams& p, bool requires_grad);
MlpNodes bind_mlp(Graph& g, const TransferMLP& p, bool requires_grad);

// image [C_in,H,W] -> features [C,H/4,W/4] (for H,W divisible by 4).
NodeId backbone_forward(Graph& g, NodeId image, const BackboneNodes& n,
                        const BackboneConfig& cfg);

// features [C,h,w] -> probabilities [out_h,out_w].
NodeId head_forward(Graph& g, NodeId features, const HeadNodes& n, int out_h, int out_w,
                    double slope);

// Differentiable transfer. The weak head's CURRENT VALUES enter as a constant
// leaf (detached), so gradients reach the MLP parameters only — by
// construction nothing can flow back into the weak head through this path.
HeadNodes weight_transfer_nodes(Graph& g, const HeadParams& weak_values, const MlpNodes& mlp,
                                double slope, int channels);
HeadNodes weight_transfer_nodes(Graph& g, std::vector<double> weak_flat_values,
                                const MlpNodes& mlp, double slope, int channels);

// Everything the trainer optimizes, plus factory config.
struct Model {
  BackboneConfig cfg;
  BackboneParams backbone;
  HeadParams weak_head;
  HeadParams salient_head;
  TransferMLP mlp;
};

Model make_model(const BackboneConfig& cfg, uint64_t seed);

// Named parameter registry in fixed order, for the optimizer and checkpoints.
struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool is_bias;  // biases are exempt from weight decay
};
std::vector<ParamRef> model_params(Model& m);

// Checkpoint entries: every parameter plus the config scalars. Extra entries
// (e.g. trainer metadata) are preserved by load when prefixed "meta/".
std::map<std::string, Tensor> model_to_entries(const Model& m);
Model model_from_entries(const std::map<std::string, Tensor>& entries);

}  // namespace boxseg

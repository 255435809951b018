#pragma once

#include <optional>

#include "boxseg/bags.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/graph.hpp"

namespace boxseg {

struct LossConfig {
  double smooth_weight = 0.05;
  double alpha = 0.7;       // blend weight of the salient head in pixel_loss
  double clamp_eps = 1e-7;  // probabilities clamped to [eps, 1-eps] before logs
};

enum class SampleKind { weak, salient };

// MIL loss over bag score maxima plus the weighted smooth term:
//   -sum_{B+} ln(max S) - sum_{B-} ln(1 - max S) + smooth_weight * smooth_term.
// Gradient flows through the single argmax pixel of each bag; ties go to the
// lowest row-major index. Clamped probabilities get zero gradient outside
// [eps, 1-eps].
NodeId mil_loss_node(Graph& g, NodeId S, const BagSet& bags, const LossConfig& cfg);

// Eight-connected smoothness over the bag pixel set, ordered pairs:
//   sum_{p in bag pixels} sum_{p' in-bounds neighbor of p} (S(p) - S(p'))^2.
NodeId smooth_term_node(Graph& g, NodeId S, const BagSet& bags);

// Mean binary cross-entropy of the clamped blend alpha*S_a + (1-alpha)*S_t
// against mask M.
NodeId pixel_loss_node(Graph& g, const BinaryMask& M, NodeId S_a, NodeId S_t,
                       const LossConfig& cfg);

// weak -> mil (pix must be absent); salient -> mil + pix (pix required).
NodeId total_loss_node(Graph& g, SampleKind kind, NodeId mil, std::optional<NodeId> pix);

// Eager forms for tests and tools.
double mil_loss(const Tensor& S, const BagSet& bags, const LossConfig& cfg);
double smooth_term(const Tensor& S, const BagSet& bags);
double pixel_loss(const BinaryMask& M, const Tensor& S_a, const Tensor& S_t,
                  const LossConfig& cfg);

}  // namespace boxseg

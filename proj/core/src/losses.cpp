#include "boxseg/losses.hpp"

#include <cmath>

#include "boxseg/errors.hpp"

namespace boxseg {

namespace {

void check_map(const Graph& g, NodeId S, const BagSet& bags, const char* who) {
  const Tensor& t = g.value(S);
  if (t.ndim() != 2 || t.shape[0] != bags.patch_h || t.shape[1] != bags.patch_w) {
    throw DataError(std::string(who) + ": score map " + shape_to_string(t.shape) +
                    " does not match bag patch " + std::to_string(bags.patch_h) + "x" +
                    std::to_string(bags.patch_w));
  }
  if (!t.all_finite()) throw NumericError(std::string(who) + ": non-finite score map");
}

// argmax over a bag, ties -> lowest row-major flat index (bag pixels are
// already in increasing flat order, so strict > suffices).
int bag_argmax(const Tensor& S, const Bag& b, int width) {
  int best = b.pixels[0].first * width + b.pixels[0].second;
  double best_v = S.at(best);
  for (auto [r, c] : b.pixels) {
    const int flat = r * width + c;
    if (S.at(flat) > best_v) {
      best_v = S.at(flat);
      best = flat;
    }
  }
  return best;
}

}  // namespace

NodeId smooth_term_node(Graph& g, NodeId S, const BagSet& bags) {
  check_map(g, S, bags, "smooth_term");
  const int h = bags.patch_h, w = bags.patch_w;
  const std::vector<int> pix = bag_pixel_set(bags);
  const Tensor& sv = g.value(S);

  double phi = 0.0;
  for (int p : pix) {
    const int r = p / w, c = p % w;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int nr = r + dr, nc = c + dc;
        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
        const double d = sv.at(p) - sv.at2(nr, nc);
        phi += d * d;
      }
    }
  }

  auto bw = [pix, h, w](Graph& g, NodeId self) {
    const NodeId s_id = g.inputs(self)[0];
    if (!g.requires_grad(s_id)) return;
    const double go = (*g.grad(self))[0];
    const Tensor& sv = g.value(s_id);
    std::vector<double>& gs = g.grad_buffer(s_id);
    for (int p : pix) {
      const int r = p / w, c = p % w;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          const int q = nr * w + nc;
          const double d = sv.at(p) - sv.at(q);
          gs[static_cast<size_t>(p)] += go * 2.0 * d;
          gs[static_cast<size_t>(q)] -= go * 2.0 * d;
        }
      }
    }
  };
  return g.custom("smooth_term", {S}, Tensor::from_data({1}, {phi}), bw);
}

NodeId mil_loss_node(Graph& g, NodeId S, const BagSet& bags, const LossConfig& cfg) {
  check_map(g, S, bags, "mil_loss");
  if (bags.positives.empty() && bags.negatives.empty()) {
    throw DataError("mil_loss: empty bag set");
  }
  const int w = bags.patch_w;
  const double eps = cfg.clamp_eps;
  const Tensor& sv = g.value(S);

  // (flat index, is_positive) per bag, frozen at forward time.
  std::vector<std::pair<int, bool>> picks;
  double unary = 0.0;
  for (const Bag& b : bags.positives) {
    const int p = bag_argmax(sv, b, w);
    picks.emplace_back(p, true);
    unary -= std::log(std::clamp(sv.at(p), eps, 1.0 - eps));
  }
  for (const Bag& b : bags.negatives) {
    const int p = bag_argmax(sv, b, w);
    picks.emplace_back(p, false);
    unary -= std::log(1.0 - std::clamp(sv.at(p), eps, 1.0 - eps));
  }

  auto bw = [picks, eps](Graph& g, NodeId self) {
    const NodeId s_id = g.inputs(self)[0];
    if (!g.requires_grad(s_id)) return;
    const double go = (*g.grad(self))[0];
    const Tensor& sv = g.value(s_id);
    std::vector<double>& gs = g.grad_buffer(s_id);
    for (auto [p, positive] : picks) {
      const double s = sv.at(p);
      if (s < eps || s > 1.0 - eps) continue;  // clamped flat: zero gradient
      gs[static_cast<size_t>(p)] += go * (positive ? -1.0 / s : 1.0 / (1.0 - s));
    }
  };
  const NodeId unary_node = g.custom("mil_unary", {S}, Tensor::from_data({1}, {unary}), bw);
  const NodeId phi = smooth_term_node(g, S, bags);
  return g.add(unary_node, g.scale(phi, cfg.smooth_weight));
}

NodeId pixel_loss_node(Graph& g, const BinaryMask& M, NodeId S_a, NodeId S_t,
                       const LossConfig& cfg) {
  const Tensor& a = g.value(S_a);
  const Tensor& t = g.value(S_t);
  if (a.ndim() != 2 || !a.same_shape(t) || a.shape[0] != M.height || a.shape[1] != M.width) {
    throw DataError("pixel_loss: shape mismatch: S_a " + shape_to_string(a.shape) + ", S_t " +
                    shape_to_string(t.shape) + ", mask " + std::to_string(M.height) + "x" +
                    std::to_string(M.width));
  }
  const double alpha = cfg.alpha;
  const double eps = cfg.clamp_eps;
  const int n = a.numel();

  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double blend = alpha * a.at(i) + (1.0 - alpha) * t.at(i);
    const double b = std::clamp(blend, eps, 1.0 - eps);
    sum -= M.bits[static_cast<size_t>(i)] ? std::log(b) : std::log(1.0 - b);
  }

  BinaryMask mask = M;
  auto bw = [mask = std::move(mask), alpha, eps, n](Graph& g, NodeId self) {
    const NodeId a_id = g.inputs(self)[0];
    const NodeId t_id = g.inputs(self)[1];
    const double go = (*g.grad(self))[0] / n;
    const Tensor& av = g.value(a_id);
    const Tensor& tv = g.value(t_id);
    const bool need_a = g.requires_grad(a_id);
    const bool need_t = g.requires_grad(t_id);
    if (!need_a && !need_t) return;
    for (int i = 0; i < n; ++i) {
      const double blend = alpha * av.at(i) + (1.0 - alpha) * tv.at(i);
      if (blend < eps || blend > 1.0 - eps) continue;
      const double db = mask.bits[static_cast<size_t>(i)] ? -1.0 / blend : 1.0 / (1.0 - blend);
      if (need_a) g.grad_buffer(a_id)[static_cast<size_t>(i)] += go * alpha * db;
      if (need_t) g.grad_buffer(t_id)[static_cast<size_t>(i)] += go * (1.0 - alpha) * db;
    }
  };
  return g.custom("pixel_loss", {S_a, S_t}, Tensor::from_data({1}, {sum / n}), bw);
}

NodeId total_loss_node(Graph& g, SampleKind kind, NodeId mil, std::optional<NodeId> pix) {
  if (kind == SampleKind::weak) {
    if (pix.has_value()) throw DataError("total_loss: pixel loss supplied for weak sample");
    return mil;
  }
  if (!pix.has_value()) throw DataError("total_loss: salient sample requires a pixel loss");
  return g.add(mil, *pix);
}

double mil_loss(const Tensor& S, const BagSet& bags, const LossConfig& cfg) {
  Graph g;
  return g.value(mil_loss_node(g, g.input(S), bags, cfg)).at(0);
}

double smooth_term(const Tensor& S, const BagSet& bags) {
  Graph g;
  return g.value(smooth_term_node(g, g.input(S), bags)).at(0);
}

double pixel_loss(const BinaryMask& M, const Tensor& S_a, const Tensor& S_t,
                  const LossConfig& cfg) {
  Graph g;
  return g.value(pixel_loss_node(g, M, g.input(S_a), g.input(S_t), cfg)).at(0);
}

}  // namespace boxseg

#include "boxseg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace boxseg {

namespace {

// Valid output range [xlo, xhi] for one kernel column j: the x with
// 0 <= x*stride - pad + j < in_size.
void conv_x_range(int out_size, int in_size, int stride, int pad, int j,
                  int* xlo, int* xhi) {
  int lo = 0;
  while (lo < out_size && lo * stride - pad + j < 0) ++lo;
  int hi = out_size - 1;
  while (hi >= 0 && hi * stride - pad + j >= in_size) --hi;
  *xlo = lo;
  *xhi = hi;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Half-pixel source coordinates for resizing in_size -> out_size.
struct AxisSample {
  int lo, hi;
  double frac;  // weight of hi
};

std::vector<AxisSample> bilinear_axis(int in_size, int out_size) {
  std::vector<AxisSample> s(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    s[o].lo = lo;
    s[o].hi = std::min(lo + 1, in_size - 1);
    s[o].frac = src - lo;
  }
  return s;
}

}  // namespace

const Graph::Node& Graph::node(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw std::invalid_argument("invalid node id " + std::to_string(id));
  }
  return nodes_[id];
}

Graph::Node& Graph::node(NodeId id) {
  return const_cast<Node&>(static_cast<const Graph*>(this)->node(id));
}

bool Graph::any_requires_grad(const std::vector<NodeId>& ids) const {
  return std::any_of(ids.begin(), ids.end(),
                     [this](NodeId id) { return node(id).requires_grad; });
}

NodeId Graph::push(const char* tag, std::vector<NodeId> inputs, Tensor value,
                   BackwardFn backward) {
  const bool rg = any_requires_grad(inputs);
  nodes_.push_back(Node{tag, std::move(inputs), std::move(value), {}, rg,
                        rg ? std::move(backward) : BackwardFn{}});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{"input", {}, std::move(value), {}, requires_grad, {}});
  return static_cast<NodeId>(nodes_.size() - 1);
}

const std::vector<double>* Graph::grad(NodeId id) const {
  const Node& n = node(id);
  return n.grad.empty() ? nullptr : &n.grad;
}

std::vector<double>& Graph::grad_buffer(NodeId id) {
  Node& n = node(id);
  if (n.grad.empty()) {
    n.grad.assign(n.value.data.size(), 0.0);
  }
  return n.grad;
}

void Graph::backward(NodeId root) {
  if (node(root).value.numel() != 1) {
    throw std::invalid_argument("backward root must be scalar, got shape " +
                                shape_to_string(node(root).value.shape));
  }
  if (!node(root).requires_grad) {
    return;  // nothing trainable below the root
  }
  grad_buffer(root)[0] += 1.0;
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

NodeId Graph::conv2d(NodeId input, NodeId kernel, NodeId bias, int stride,
                     int pad) {
  const Tensor& in = value(input);
  const Tensor& ker = value(kernel);
  const Tensor& b = value(bias);
  if (in.ndim() != 3) {
    throw std::invalid_argument("conv2d input must be [C,H,W], got " +
                                shape_to_string(in.shape));
  }
  if (ker.ndim() != 4) {
    throw std::invalid_argument("conv2d kernel must be [K,C,kh,kw], got " +
                                shape_to_string(ker.shape));
  }
  const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
  const int K = ker.shape[0], kh = ker.shape[2], kw = ker.shape[3];
  if (ker.shape[1] != C) {
    throw std::invalid_argument("conv2d channel mismatch: input has " +
                                std::to_string(C) + " channels, kernel expects " +
                                std::to_string(ker.shape[1]));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw std::invalid_argument("conv2d kernel sides must be odd, got " +
                                shape_to_string(ker.shape));
  }
  if (b.ndim() != 1 || b.shape[0] != K) {
    throw std::invalid_argument("conv2d bias must be [K]=[" + std::to_string(K) +
                                "], got " + shape_to_string(b.shape));
  }
  if (stride != 1 && stride != 2) {
    throw std::invalid_argument("conv2d stride must be 1 or 2, got " +
                                std::to_string(stride));
  }
  if (pad < 0 || H + 2 * pad < kh || W + 2 * pad < kw) {
    throw std::invalid_argument("conv2d spatial size too small: input " +
                                shape_to_string(in.shape) + ", kernel " +
                                shape_to_string(ker.shape) + ", pad " +
                                std::to_string(pad));
  }
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;

  Tensor out({K, OH, OW});
  for (int k = 0; k < K; ++k) {
    std::fill(out.data.begin() + static_cast<size_t>(k) * OH * OW,
              out.data.begin() + static_cast<size_t>(k + 1) * OH * OW, b.at(k));
  }
  for (int k = 0; k < K; ++k) {
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < kh; ++i) {
        for (int j = 0; j < kw; ++j) {
          const double w = ker.at4(k, c, i, j);
          if (w == 0.0) continue;
          int xlo, xhi;
          conv_x_range(OW, W, stride, pad, j, &xlo, &xhi);
          for (int y = 0; y < OH; ++y) {
            const int yy = y * stride - pad + i;
            if (yy < 0 || yy >= H) continue;
            const double* irow = &in.data[(static_cast<size_t>(c) * H + yy) * W];
            double* orow = &out.data[(static_cast<size_t>(k) * OH + y) * OW];
            for (int x = xlo; x <= xhi; ++x) {
              orow[x] += w * irow[x * stride - pad + j];
            }
          }
        }
      }
    }
  }

  auto bw = [stride, pad, C, H, W, K, kh, kw, OH, OW](Graph& g, NodeId self) {
    const auto& ids = g.inputs(self);
    const NodeId in_id = ids[0], ker_id = ids[1], bias_id = ids[2];
    const std::vector<double>& go = *g.grad(self);
    const Tensor& in = g.value(in_id);
    const Tensor& ker = g.value(ker_id);

    if (g.requires_grad(bias_id)) {
      std::vector<double>& gb = g.grad_buffer(bias_id);
      for (int k = 0; k < K; ++k) {
        double acc = 0.0;
        const double* grow = &go[static_cast<size_t>(k) * OH * OW];
        for (int i = 0; i < OH * OW; ++i) acc += grow[i];
        gb[k] += acc;
      }
    }
    const bool need_in = g.requires_grad(in_id);
    const bool need_ker = g.requires_grad(ker_id);
    if (!need_in && !need_ker) return;
    std::vector<double>* gi = need_in ? &g.grad_buffer(in_id) : nullptr;
    std::vector<double>* gk = need_ker ? &g.grad_buffer(ker_id) : nullptr;
    for (int k = 0; k < K; ++k) {
      for (int c = 0; c < C; ++c) {
        for (int i = 0; i < kh; ++i) {
          for (int j = 0; j < kw; ++j) {
            const double w = ker.at4(k, c, i, j);
            double wacc = 0.0;
            int xlo, xhi;
            conv_x_range(OW, W, stride, pad, j, &xlo, &xhi);
            for (int y = 0; y < OH; ++y) {
              const int yy = y * stride - pad + i;
              if (yy < 0 || yy >= H) continue;
              const double* grow = &go[(static_cast<size_t>(k) * OH + y) * OW];
              const double* irow =
                  &in.data[(static_cast<size_t>(c) * H + yy) * W];
              double* girow =
                  gi ? &(*gi)[(static_cast<size_t>(c) * H + yy) * W] : nullptr;
              for (int x = xlo; x <= xhi; ++x) {
                const int xx = x * stride - pad + j;
                if (gk) wacc += grow[x] * irow[xx];
                if (girow) girow[xx] += w * grow[x];
              }
            }
            if (gk) {
              (*gk)[((static_cast<size_t>(k) * C + c) * kh + i) * kw + j] += wacc;
            }
          }
        }
      }
    }
  };
  return push("conv2d", {input, kernel, bias}, std::move(out), bw);
}

NodeId Graph::leaky_relu(NodeId x, double slope) {
  if (slope <= 0.0 || slope >= 1.0) {
    throw std::invalid_argument("leaky_relu slope must be in (0,1), got " +
                                std::to_string(slope));
  }
  const Tensor& in = value(x);
  Tensor out(in.shape);
  for (int i = 0; i < in.numel(); ++i) {
    const double v = in.at(i);
    out.at(i) = v > 0.0 ? v : slope * v;
  }
  auto bw = [slope](Graph& g, NodeId self) {
    const NodeId x_id = g.inputs(self)[0];
    if (!g.requires_grad(x_id)) return;
    const std::vector<double>& go = *g.grad(self);
    const Tensor& in = g.value(x_id);
    std::vector<double>& gx = g.grad_buffer(x_id);
    for (size_t i = 0; i < go.size(); ++i) {
      gx[i] += (in.data[i] > 0.0 ? 1.0 : slope) * go[i];
    }
  };
  return push("leaky_relu", {x}, std::move(out), bw);
}

NodeId Graph::sigmoid(NodeId x) {
  const Tensor& in = value(x);
  Tensor out(in.shape);
  for (int i = 0; i < in.numel(); ++i) {
    out.at(i) = stable_sigmoid(in.at(i));
  }
  auto bw = [](Graph& g, NodeId self) {
    const NodeId x_id = g.inputs(self)[0];
    if (!g.requires_grad(x_id)) return;
    const std::vector<double>& go = *g.grad(self);
    const Tensor& y = g.value(self);
    std::vector<double>& gx = g.grad_buffer(x_id);
    for (size_t i = 0; i < go.size(); ++i) {
      const double v = y.data[i];
      gx[i] += v * (1.0 - v) * go[i];
    }
  };
  return push("sigmoid", {x}, std::move(out), bw);
}

NodeId Graph::upsample_bilinear(NodeId x, int out_h, int out_w) {
  const Tensor& in = value(x);
  if (in.ndim() != 3) {
    throw std::invalid_argument("upsample_bilinear input must be [C,h,w], got " +
                                shape_to_string(in.shape));
  }
  const int C = in.shape[0], h = in.shape[1], w = in.shape[2];
  if (out_h < h || out_w < w) {
    throw std::invalid_argument("upsample_bilinear target " +
                                std::to_string(out_h) + "x" + std::to_string(out_w) +
                                " smaller than source " + std::to_string(h) + "x" +
                                std::to_string(w));
  }
  const auto ys = bilinear_axis(h, out_h);
  const auto xs = bilinear_axis(w, out_w);
  Tensor out({C, out_h, out_w});
  for (int c = 0; c < C; ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      const AxisSample& ay = ys[oy];
      for (int ox = 0; ox < out_w; ++ox) {
        const AxisSample& ax = xs[ox];
        const double v00 = in.at3(c, ay.lo, ax.lo);
        const double v01 = in.at3(c, ay.lo, ax.hi);
        const double v10 = in.at3(c, ay.hi, ax.lo);
        const double v11 = in.at3(c, ay.hi, ax.hi);
        const double top = v00 + (v01 - v00) * ax.frac;
        const double bot = v10 + (v11 - v10) * ax.frac;
        out.at3(c, oy, ox) = top + (bot - top) * ay.frac;
      }
    }
  }
  auto bw = [C, h, w, out_h, out_w, ys, xs](Graph& g, NodeId self) {
    const NodeId x_id = g.inputs(self)[0];
    if (!g.requires_grad(x_id)) return;
    const std::vector<double>& go = *g.grad(self);
    std::vector<double>& gx = g.grad_buffer(x_id);
    for (int c = 0; c < C; ++c) {
      for (int oy = 0; oy < out_h; ++oy) {
        const AxisSample& ay = ys[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const AxisSample& ax = xs[ox];
          const double gv = go[(static_cast<size_t>(c) * out_h + oy) * out_w + ox];
          const double wy1 = ay.frac, wy0 = 1.0 - ay.frac;
          const double wx1 = ax.frac, wx0 = 1.0 - ax.frac;
          gx[(static_cast<size_t>(c) * h + ay.lo) * w + ax.lo] += wy0 * wx0 * gv;
          gx[(static_cast<size_t>(c) * h + ay.lo) * w + ax.hi] += wy0 * wx1 * gv;
          gx[(static_cast<size_t>(c) * h + ay.hi) * w + ax.lo] += wy1 * wx0 * gv;
          gx[(static_cast<size_t>(c) * h + ay.hi) * w + ax.hi] += wy1 * wx1 * gv;
        }
      }
    }
  };
  return push("upsample_bilinear", {x}, std::move(out), bw);
}

NodeId Graph::linear(NodeId w, NodeId x, NodeId b) {
  const Tensor& W = value(w);
  const Tensor& X = value(x);
  const Tensor& B = value(b);
  if (W.ndim() != 2 || X.ndim() != 1 || B.ndim() != 1) {
    throw std::invalid_argument("linear expects w [m,n], x [n], b [m]");
  }
  const int m = W.shape[0], n = W.shape[1];
  if (X.shape[0] != n || B.shape[0] != m) {
    throw std::invalid_argument("linear dimension mismatch: w " +
                                shape_to_string(W.shape) + ", x " +
                                shape_to_string(X.shape) + ", b " +
                                shape_to_string(B.shape));
  }
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    const double* wrow = &W.data[static_cast<size_t>(i) * n];
    double acc = B.at(i);
    for (int j = 0; j < n; ++j) acc += wrow[j] * X.at(j);
    out.at(i) = acc;
  }
  auto bw = [m, n](Graph& g, NodeId self) {
    const auto& ids = g.inputs(self);
    const NodeId w_id = ids[0], x_id = ids[1], b_id = ids[2];
    const std::vector<double>& go = *g.grad(self);
    const Tensor& W = g.value(w_id);
    const Tensor& X = g.value(x_id);
    if (g.requires_grad(b_id)) {
      std::vector<double>& gb = g.grad_buffer(b_id);
      for (int i = 0; i < m; ++i) gb[i] += go[i];
    }
    if (g.requires_grad(w_id)) {
      std::vector<double>& gw = g.grad_buffer(w_id);
      for (int i = 0; i < m; ++i) {
        const double gi = go[i];
        if (gi == 0.0) continue;
        double* grow = &gw[static_cast<size_t>(i) * n];
        for (int j = 0; j < n; ++j) grow[j] += gi * X.at(j);
      }
    }
    if (g.requires_grad(x_id)) {
      std::vector<double>& gx = g.grad_buffer(x_id);
      for (int i = 0; i < m; ++i) {
        const double gi = go[i];
        if (gi == 0.0) continue;
        const double* wrow = &W.data[static_cast<size_t>(i) * n];
        for (int j = 0; j < n; ++j) gx[j] += gi * wrow[j];
      }
    }
  };
  return push("linear", {w, x, b}, std::move(out), bw);
}

NodeId Graph::slice_view(NodeId x, int offset, std::vector<int> shape) {
  const Tensor& in = value(x);
  const int n = shape_numel(shape);
  if (offset < 0 || offset + n > in.numel()) {
    throw std::invalid_argument("slice_view [" + std::to_string(offset) + "," +
                                std::to_string(offset + n) +
                                ") out of range for tensor of size " +
                                std::to_string(in.numel()));
  }
  Tensor out = Tensor::from_data(
      std::move(shape),
      std::vector<double>(in.data.begin() + offset, in.data.begin() + offset + n));
  auto bw = [offset, n](Graph& g, NodeId self) {
    const NodeId x_id = g.inputs(self)[0];
    if (!g.requires_grad(x_id)) return;
    const std::vector<double>& go = *g.grad(self);
    std::vector<double>& gx = g.grad_buffer(x_id);
    for (int i = 0; i < n; ++i) gx[offset + i] += go[i];
  };
  return push("slice_view", {x}, std::move(out), bw);
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) {
    throw std::invalid_argument("add shape mismatch: " + shape_to_string(A.shape) +
                                " vs " + shape_to_string(B.shape));
  }
  Tensor out(A.shape);
  for (int i = 0; i < A.numel(); ++i) out.at(i) = A.at(i) + B.at(i);
  auto bw = [](Graph& g, NodeId self) {
    const std::vector<double>& go = *g.grad(self);
    for (NodeId in : g.inputs(self)) {
      if (!g.requires_grad(in)) continue;
      std::vector<double>& gi = g.grad_buffer(in);
      for (size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
    }
  };
  return push("add", {a, b}, std::move(out), bw);
}

NodeId Graph::scale(NodeId x, double c) {
  const Tensor& in = value(x);
  Tensor out(in.shape);
  for (int i = 0; i < in.numel(); ++i) out.at(i) = c * in.at(i);
  auto bw = [c](Graph& g, NodeId self) {
    const NodeId x_id = g.inputs(self)[0];
    if (!g.requires_grad(x_id)) return;
    const std::vector<double>& go = *g.grad(self);
    std::vector<double>& gx = g.grad_buffer(x_id);
    for (size_t i = 0; i < go.size(); ++i) gx[i] += c * go[i];
  };
  return push("scale", {x}, std::move(out), bw);
}

NodeId Graph::custom(const char* tag, std::vector<NodeId> inputs, Tensor value,
                     BackwardFn backward) {
  for (NodeId id : inputs) node(id);  // validate
  return push(tag, std::move(inputs), std::move(value), std::move(backward));
}


}  // namespace boxseg

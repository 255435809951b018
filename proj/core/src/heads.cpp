#include "boxseg/heads.hpp"

#include <cmath>

#include "boxseg/errors.hpp"

namespace boxseg {

namespace {

Tensor he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(shape);
  const double bound = std::sqrt(6.0 / fan_in);
  for (int i = 0; i < t.numel(); ++i) t.at(i) = rng.uniform(-bound, bound);
  return t;
}

void append(std::vector<double>& out, const Tensor& t) {
  out.insert(out.end(), t.data.begin(), t.data.end());
}

}  // namespace

int head_param_count(int c) { return 18 * c * c + 3 * c + 1; }

int transfer_hidden_dim(int d) { return std::max(64, (d + 3) / 4); }

BackboneParams make_backbone(const BackboneConfig& cfg, Rng& rng) {
  BackboneParams p;
  int c_in = cfg.in_channels;
  for (int i = 0; i < 4; ++i) {
    const int c_out = cfg.channels[static_cast<size_t>(i)];
    p.w[static_cast<size_t>(i)] = he_uniform({c_out, c_in, 3, 3}, c_in * 9, rng);
    p.b[static_cast<size_t>(i)] = Tensor({c_out});
    c_in = c_out;
  }
  return p;
}

HeadParams make_head(int c, Rng& rng) {
  HeadParams p;
  p.w1 = he_uniform({c, c, 3, 3}, c * 9, rng);
  p.b1 = Tensor({c});
  p.w2 = he_uniform({c, c, 3, 3}, c * 9, rng);
  p.b2 = Tensor({c});
  p.w3 = he_uniform({1, c, 1, 1}, c, rng);
  p.b3 = Tensor({1});
  return p;
}

TransferMLP make_transfer_mlp(int d, double slope, Rng& rng) {
  const int h = transfer_hidden_dim(d);
  TransferMLP m;
  m.W1 = he_uniform({h, d}, d, rng);
  m.b1 = Tensor({h});
  m.W2 = Tensor({d, h});  // zero: transferred head starts at all-zero params
  m.b2 = Tensor({d});
  m.slope = slope;
  return m;
}

std::vector<double> flatten_head(const HeadParams& p) {
  std::vector<double> flat;
  append(flat, p.w1);
  append(flat, p.b1);
  append(flat, p.w2);
  append(flat, p.b2);
  append(flat, p.w3);
  append(flat, p.b3);
  return flat;
}

HeadParams unflatten_head(const std::vector<double>& flat, int c) {
  if (static_cast<int>(flat.size()) != head_param_count(c)) {
    throw DataError("unflatten_head: got " + std::to_string(flat.size()) +
                    " values, expected " + std::to_string(head_param_count(c)) +
                    " for " + std::to_string(c) + " channels");
  }
  HeadParams p;
  auto it = flat.begin();
  auto take = [&](std::vector<int> shape) {
    const int n = shape_numel(shape);
    Tensor t = Tensor::from_data(std::move(shape), std::vector<double>(it, it + n));
    it += n;
    return t;
  };
  p.w1 = take({c, c, 3, 3});
  p.b1 = take({c});
  p.w2 = take({c, c, 3, 3});
  p.b2 = take({c});
  p.w3 = take({1, c, 1, 1});
  p.b3 = take({1});
  return p;
}

std::vector<double> transfer_flat(const std::vector<double>& flat, const TransferMLP& mlp) {
  const int d = static_cast<int>(flat.size());
  if (mlp.W1.ndim() != 2 || mlp.W1.shape[1] != d || mlp.W2.shape[0] != d ||
      mlp.W2.shape[1] != mlp.W1.shape[0]) {
    throw DataError("transfer_flat: MLP shapes W1 " + shape_to_string(mlp.W1.shape) + ", W2 " +
                    shape_to_string(mlp.W2.shape) + " do not fit input of length " +
                    std::to_string(d));
  }
  const int h = mlp.W1.shape[0];
  std::vector<double> hidden(static_cast<size_t>(h));
  for (int i = 0; i < h; ++i) {
    double s = mlp.b1.at(i);
    for (int j = 0; j < d; ++j) s += mlp.W1.at2(i, j) * flat[static_cast<size_t>(j)];
    hidden[static_cast<size_t>(i)] = s > 0.0 ? s : mlp.slope * s;
  }
  std::vector<double> out(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    double s = mlp.b2.at(i);
    for (int j = 0; j < h; ++j) s += mlp.W2.at2(i, j) * hidden[static_cast<size_t>(j)];
    out[static_cast<size_t>(i)] = s;
  }
  return out;
}

HeadParams weight_transfer(const HeadParams& weak, const TransferMLP& mlp) {
  const int c = weak.w1.shape[0];
  return unflatten_head(transfer_flat(flatten_head(weak), mlp), c);
}

BackboneNodes bind_backbone(Graph& g, const BackboneParams& p, bool rg) {
  BackboneNodes n;
  for (size_t i = 0; i < 4; ++i) {
    n.w[i] = g.input(p.w[i], rg);
    n.b[i] = g.input(p.b[i], rg);
  }
  return n;
}

HeadNodes bind_head(Graph& g, const HeadParams& p, bool rg) {
  return HeadNodes{g.input(p.w1, rg), g.input(p.b1, rg), g.input(p.w2, rg),
                   g.input(p.b2, rg), g.input(p.w3, rg), g.input(p.b3, rg)};
}

MlpNodes bind_mlp(Graph& g, const TransferMLP& p, bool rg) {
  return MlpNodes{g.input(p.W1, rg), g.input(p.b1, rg), g.input(p.W2, rg), g.input(p.b2, rg)};
}

NodeId backbone_forward(Graph& g, NodeId image, const BackboneNodes& n,
                        const BackboneConfig& cfg) {
  NodeId x = image;
  for (size_t i = 0; i < 4; ++i) {
    x = g.conv2d(x, n.w[i], n.b[i], cfg.strides[i], 1);
    x = g.leaky_relu(x, cfg.slope);
  }
  return x;
}

NodeId head_forward(Graph& g, NodeId features, const HeadNodes& n, int out_h, int out_w,
                    double slope) {
  NodeId x = g.leaky_relu(g.conv2d(features, n.w1, n.b1, 1, 1), slope);
  x = g.leaky_relu(g.conv2d(x, n.w2, n.b2, 1, 1), slope);
  x = g.conv2d(x, n.w3, n.b3, 1, 0);              // [1,h,w]
  x = g.upsample_bilinear(x, out_h, out_w);       // [1,out_h,out_w]
  x = g.slice_view(x, 0, {out_h, out_w});         // drop the channel axis
  return g.sigmoid(x);
}

HeadNodes weight_transfer_nodes(Graph& g, const HeadParams& weak_values, const MlpNodes& mlp,
                                double slope, int c) {
  return weight_transfer_nodes(g, flatten_head(weak_values), mlp, slope, c);
}

HeadNodes weight_transfer_nodes(Graph& g, std::vector<double> flat, const MlpNodes& mlp,
                                double slope, int c) {
  const int d = static_cast<int>(flat.size());
  if (d != head_param_count(c)) {
    throw DataError("weight_transfer: weak head has " + std::to_string(d) +
                    " params, expected " + std::to_string(head_param_count(c)));
  }
  const NodeId detached = g.input(Tensor::from_data({d}, std::move(flat)), false);
  const NodeId hidden = g.leaky_relu(g.linear(mlp.W1, detached, mlp.b1), slope);
  const NodeId out = g.linear(mlp.W2, hidden, mlp.b2);

  HeadNodes h;
  int off = 0;
  auto take = [&](std::vector<int> shape) {
    const int n = shape_numel(shape);
    const NodeId id = g.slice_view(out, off, std::move(shape));
    off += n;
    return id;
  };
  h.w1 = take({c, c, 3, 3});
  h.b1 = take({c});
  h.w2 = take({c, c, 3, 3});
  h.b2 = take({c});
  h.w3 = take({1, c, 1, 1});
  h.b3 = take({1});
  return h;
}

Model make_model(const BackboneConfig& cfg, uint64_t seed) {
  Model m;
  m.cfg = cfg;
  SeededRng rng(child_seed(seed, 0));
  m.backbone = make_backbone(cfg, rng);
  SeededRng rng_w(child_seed(seed, 1));
  m.weak_head = make_head(cfg.head_channels(), rng_w);
  SeededRng rng_s(child_seed(seed, 2));
  m.salient_head = make_head(cfg.head_channels(), rng_s);
  SeededRng rng_m(child_seed(seed, 3));
  m.mlp = make_transfer_mlp(head_param_count(cfg.head_channels()), cfg.slope, rng_m);
  return m;
}

std::vector<ParamRef> model_params(Model& m) {
  std::vector<ParamRef> refs;
  for (size_t i = 0; i < 4; ++i) {
    refs.push_back({"backbone/w" + std::to_string(i), &m.backbone.w[i], false});
    refs.push_back({"backbone/b" + std::to_string(i), &m.backbone.b[i], true});
  }
  auto head = [&](const std::string& prefix, HeadParams& h) {
    refs.push_back({prefix + "/w1", &h.w1, false});
    refs.push_back({prefix + "/b1", &h.b1, true});
    refs.push_back({prefix + "/w2", &h.w2, false});
    refs.push_back({prefix + "/b2", &h.b2, true});
    refs.push_back({prefix + "/w3", &h.w3, false});
    refs.push_back({prefix + "/b3", &h.b3, true});
  };
  head("weak_head", m.weak_head);
  head("salient_head", m.salient_head);
  refs.push_back({"transfer_mlp/W1", &m.mlp.W1, false});
  refs.push_back({"transfer_mlp/b1", &m.mlp.b1, true});
  refs.push_back({"transfer_mlp/W2", &m.mlp.W2, false});
  refs.push_back({"transfer_mlp/b2", &m.mlp.b2, true});
  return refs;
}

std::map<std::string, Tensor> model_to_entries(const Model& m) {
  std::map<std::string, Tensor> e;
  Model& mm = const_cast<Model&>(m);  // refs are read-only here
  for (const ParamRef& r : model_params(mm)) e.emplace(r.name, *r.tensor);
  e.emplace("cfg/in_channels", Tensor::scalar(m.cfg.in_channels));
  e.emplace("cfg/channels",
            Tensor::from_data({4}, {static_cast<double>(m.cfg.channels[0]),
                                    static_cast<double>(m.cfg.channels[1]),
                                    static_cast<double>(m.cfg.channels[2]),
                                    static_cast<double>(m.cfg.channels[3])}));
  e.emplace("cfg/strides",
            Tensor::from_data({4}, {static_cast<double>(m.cfg.strides[0]),
                                    static_cast<double>(m.cfg.strides[1]),
                                    static_cast<double>(m.cfg.strides[2]),
                                    static_cast<double>(m.cfg.strides[3])}));
  e.emplace("cfg/slope", Tensor::scalar(m.cfg.slope));
  return e;
}

Model model_from_entries(const std::map<std::string, Tensor>& entries) {
  auto get = [&](const std::string& name) -> const Tensor& {
    auto it = entries.find(name);
    if (it == entries.end()) throw DataError("checkpoint: missing entry '" + name + "'");
    return it->second;
  };
  Model m;
  m.cfg.in_channels = static_cast<int>(get("cfg/in_channels").at(0));
  const Tensor& ch = get("cfg/channels");
  const Tensor& st = get("cfg/strides");
  for (size_t i = 0; i < 4; ++i) {
    m.cfg.channels[i] = static_cast<int>(ch.at(static_cast<int>(i)));
    m.cfg.strides[i] = static_cast<int>(st.at(static_cast<int>(i)));
  }
  m.cfg.slope = get("cfg/slope").at(0);
  // Allocate expected shapes first so mismatched entries are rejected.
  SeededRng scratch(0);
  m.backbone = make_backbone(m.cfg, scratch);
  m.weak_head = make_head(m.cfg.head_channels(), scratch);
  m.salient_head = make_head(m.cfg.head_channels(), scratch);
  m.mlp = make_transfer_mlp(head_param_count(m.cfg.head_channels()), m.cfg.slope, scratch);
  for (const ParamRef& r : model_params(m)) {
    const Tensor& t = get(r.name);
    if (!r.tensor->same_shape(t)) {
      throw DataError("checkpoint: entry '" + r.name + "' has shape " +
                      shape_to_string(t.shape) + ", expected " +
                      shape_to_string(r.tensor->shape));
    }
    *r.tensor = t;
  }
  return m;
}

}  // namespace boxseg

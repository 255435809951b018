#include "boxseg/gradsuite.hpp"

#include <utility>

#include "boxseg/bags.hpp"
#include "boxseg/errors.hpp"
#include "boxseg/graph.hpp"
#include "boxseg/heads.hpp"
#include "boxseg/losses.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/trainer.hpp"

namespace boxseg {

namespace {

Box random_box(Rng& r, int h, int w) {
  const int x = r.uniform_int(w - 2);
  const int y = r.uniform_int(h - 2);
  return Box{x, y, 2 + r.uniform_int(w - x - 1), 2 + r.uniform_int(h - y - 1)};
}

Tensor random_logits(Rng& r, std::vector<int> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = r.uniform(-2.0, 2.0);
  return t;
}

BinaryMask random_mask_in_box(Rng& r, int h, int w, const Box& box) {
  BinaryMask m(h, w);
  for (int row = box.y; row < box.y + box.h; ++row) {
    for (int col = box.x; col < box.x + box.w; ++col) {
      m.at(row, col) = r.uniform_int(5) > 0;  // ~80% fill
    }
  }
  // Keep the box tight so box == bbox(mask) holds for the bag builder.
  m.at(box.y, box.x) = 1;
  m.at(box.y + box.h - 1, box.x + box.w - 1) = 1;
  return m;
}

void fold_in(GradTargetResult& tr, const GradCheckResult& r, int params) {
  if (r.max_rel_err > tr.worst.max_rel_err) tr.worst = r;
  tr.params_checked += params;
}

GradTargetResult check_mil(const GradSuiteConfig& cfg) {
  GradTargetResult tr{"mil_loss", {}, 0};
  const int P = cfg.patch;
  const LossConfig lc;
  for (int s = 0; s < cfg.seeds; ++s) {
    SeededRng r(child_seed(cfg.seed, 100 + s));
    const Tensor logits = random_logits(r, {P, P});
    const BagSet bags = build_bags(random_box(r, P, P), P, P);
    DiffFn fn = [&](const Tensor& at, std::vector<double>* grad_out) {
      Graph g;
      const NodeId x = g.input(at, grad_out != nullptr);
      const NodeId loss = mil_loss_node(g, g.sigmoid(x), bags, lc);
      const double v = g.value(loss).at(0);
      if (grad_out) {
        g.backward(loss);
        const std::vector<double>* gr = g.grad(x);
        if (gr) {
          *grad_out = *gr;
        } else {
          grad_out->assign(static_cast<size_t>(at.numel()), 0.0);
        }
      }
      return v;
    };
    fold_in(tr, gradcheck(fn, logits, cfg.eps), static_cast<int>(logits.numel()));
  }
  return tr;
}

GradTargetResult check_pixel(const GradSuiteConfig& cfg) {
  GradTargetResult tr{"pixel_loss", {}, 0};
  const int P = cfg.patch;
  const LossConfig lc;
  for (int s = 0; s < cfg.seeds; ++s) {
    SeededRng r(child_seed(cfg.seed, 200 + s));
    const Tensor logits = random_logits(r, {2, P, P});
    const BinaryMask mask = random_mask_in_box(r, P, P, random_box(r, P, P));
    DiffFn fn = [&](const Tensor& at, std::vector<double>* grad_out) {
      Graph g;
      const NodeId x = g.input(at, grad_out != nullptr);
      const NodeId s_a = g.sigmoid(g.slice_view(x, 0, {P, P}));
      const NodeId s_t = g.sigmoid(g.slice_view(x, P * P, {P, P}));
      const NodeId loss = pixel_loss_node(g, mask, s_a, s_t, lc);
      const double v = g.value(loss).at(0);
      if (grad_out) {
        g.backward(loss);
        const std::vector<double>* gr = g.grad(x);
        if (gr) {
          *grad_out = *gr;
        } else {
          grad_out->assign(static_cast<size_t>(at.numel()), 0.0);
        }
      }
      return v;
    };
    fold_in(tr, gradcheck(fn, logits, cfg.eps), static_cast<int>(logits.numel()));
  }
  return tr;
}

GradTargetResult check_composite(const GradSuiteConfig& cfg) {
  GradTargetResult tr{"batch_loss", {}, 0};
  const int P = cfg.patch;

  TrainConfig tc;
  tc.backbone.channels = {1, 2, 2, 1};
  tc.patch_size = P;

  for (int s = 0; s < cfg.seeds; ++s) {
    SeededRng r(child_seed(cfg.seed, 300 + s));
    Model model = make_model(tc.backbone, child_seed(cfg.seed, 400 + s));
    std::vector<double> flat = flatten_params(model);
    for (double& v : flat) v += r.uniform(-0.05, 0.05);
    unflatten_params(model, flat);

    Batch batch;
    {
      Tensor img({1, P, P});
      for (double& v : img.data) v = r.uniform(0.0, 1.0);
      ImagePatch p;
      p.image = std::move(img);
      p.box = random_box(r, P, P);
      batch.weak.push_back(std::move(p));
      batch.weak_tags.push_back("gradsuite weak");
    }
    {
      Tensor img({1, P, P});
      for (double& v : img.data) v = r.uniform(0.0, 1.0);
      const Box box = random_box(r, P, P);
      ImagePatch p;
      p.image = std::move(img);
      p.mask = random_mask_in_box(r, P, P, box);
      p.box = box;
      batch.salient.push_back(std::move(p));
      batch.salient_tags.push_back("gradsuite salient");
    }

    // Pin the stop-gradient transfer input at the base point so the numeric
    // probe differentiates the same function the graph defines.
    const std::vector<double> frozen = flatten_head(model.weak_head);

    DiffFn fn = [&](const Tensor& at, std::vector<double>* grad_out) {
      unflatten_params(model, at.data);
      return batch_loss_with_grad(model, batch, tc, grad_out, nullptr, &frozen);
    };
    const Tensor at = Tensor::from_data({static_cast<int>(flat.size())}, flat);
    fold_in(tr, gradcheck(fn, at, cfg.eps, cfg.composite_floor),
            static_cast<int>(flat.size()));
  }
  return tr;
}

}  // namespace

GradSuiteReport run_grad_suite(const GradSuiteConfig& cfg) {
  if (cfg.seeds < 1 || cfg.patch < 8) {
    throw DataError("run_grad_suite: need seeds >= 1 and patch >= 8");
  }
  GradSuiteReport rep;
  rep.targets.push_back(check_mil(cfg));
  rep.targets.push_back(check_pixel(cfg));
  if (cfg.composite) rep.targets.push_back(check_composite(cfg));
  for (const GradTargetResult& t : rep.targets) {
    if (t.worst.max_rel_err > rep.max_rel_err) rep.max_rel_err = t.worst.max_rel_err;
  }
  rep.pass = rep.max_rel_err < cfg.tol;
  return rep;
}

}  // namespace boxseg

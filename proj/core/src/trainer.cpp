#include "boxseg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "boxseg/bags.hpp"
#include "boxseg/errors.hpp"
#include "boxseg/metrics.hpp"
#include "boxseg/tensor_io.hpp"

namespace boxseg {

namespace {

// Node ids for every model parameter, in model_params() order.
struct BoundModel {
  BackboneNodes bb;
  HeadNodes weak;
  HeadNodes salient;
  MlpNodes mlp;
  std::vector<NodeId> ids;
};

BoundModel bind_model(Graph& g, Model& m, bool requires_grad) {
  BoundModel bm;
  bm.bb = bind_backbone(g, m.backbone, requires_grad);
  bm.weak = bind_head(g, m.weak_head, requires_grad);
  bm.salient = bind_head(g, m.salient_head, requires_grad);
  bm.mlp = bind_mlp(g, m.mlp, requires_grad);
  for (size_t i = 0; i < 4; ++i) {
    bm.ids.push_back(bm.bb.w[i]);
    bm.ids.push_back(bm.bb.b[i]);
  }
  for (const HeadNodes* h : {&bm.weak, &bm.salient}) {
    bm.ids.insert(bm.ids.end(), {h->w1, h->b1, h->w2, h->b2, h->w3, h->b3});
  }
  bm.ids.insert(bm.ids.end(), {bm.mlp.W1, bm.mlp.b1, bm.mlp.W2, bm.mlp.b2});
  return bm;
}

void check_sample_finite(const Graph& g, NodeId id, const std::string& tag) {
  if (!g.value(id).all_finite() || !std::isfinite(g.value(id).at(0))) {
    throw NumericError("train_step: non-finite loss at sample " + tag);
  }
}

// Wires the whole batch into g and returns the mean-loss node.
NodeId build_batch_graph(Graph& g, BoundModel& bm, Model& model, const Batch& batch,
                         const TrainConfig& cfg, StepStats& stats,
                         const std::vector<double>* frozen_transfer = nullptr) {
  if (batch.weak.empty() && batch.salient.empty()) {
    throw DataError("train_step: empty batch");
  }
  const int P = cfg.patch_size;
  const double slope = cfg.backbone.slope;
  std::vector<NodeId> totals;

  for (size_t i = 0; i < batch.weak.size(); ++i) {
    const ImagePatch& p = batch.weak[i];
    const NodeId img = g.input(p.image, false);
    const NodeId feats = backbone_forward(g, img, bm.bb, cfg.backbone);
    const NodeId s_w = head_forward(g, feats, bm.weak, P, P, slope);
    const BagSet bags = build_bags(*p.box, P, P);
    const NodeId mil = mil_loss_node(g, s_w, bags, cfg.loss_cfg);
    const NodeId total = total_loss_node(g, SampleKind::weak, mil, std::nullopt);
    check_sample_finite(g, total, batch.weak_tags[i]);
    stats.mean_mil += g.value(mil).at(0);
    ++stats.mil_evals;
    totals.push_back(total);
  }

  const bool use_pixel = cfg.mode == TrainConfig::Mode::joint && !batch.salient.empty();
  HeadNodes trans{};
  if (use_pixel) {
    const int c = cfg.backbone.head_channels();
    trans = frozen_transfer
                ? weight_transfer_nodes(g, *frozen_transfer, bm.mlp, slope, c)
                : weight_transfer_nodes(g, model.weak_head, bm.mlp, slope, c);
  }

  for (size_t i = 0; i < batch.salient.size(); ++i) {
    const ImagePatch& p = batch.salient[i];
    const NodeId img = g.input(p.image, false);
    const NodeId feats = backbone_forward(g, img, bm.bb, cfg.backbone);
    const NodeId s_s = head_forward(g, feats, bm.weak, P, P, slope);
    const BagSet bags = build_bags(*p.box, P, P);
    const NodeId mil = mil_loss_node(g, s_s, bags, cfg.loss_cfg);
    stats.mean_mil += g.value(mil).at(0);
    ++stats.mil_evals;

    NodeId total;
    if (use_pixel) {
      const NodeId s_a = head_forward(g, feats, bm.salient, P, P, slope);
      const NodeId s_t = head_forward(g, feats, trans, P, P, slope);
      const NodeId pix = pixel_loss_node(g, *p.mask, s_a, s_t, cfg.loss_cfg);
      stats.mean_pix += g.value(pix).at(0);
      ++stats.pix_evals_salient;
      total = total_loss_node(g, SampleKind::salient, mil, pix);
    } else {
      total = total_loss_node(g, SampleKind::weak, mil, std::nullopt);
    }
    check_sample_finite(g, total, batch.salient_tags[i]);
    totals.push_back(total);
  }

  NodeId sum = totals[0];
  for (size_t i = 1; i < totals.size(); ++i) sum = g.add(sum, totals[i]);
  const NodeId loss = g.scale(sum, 1.0 / static_cast<double>(totals.size()));
  check_sample_finite(g, loss, "batch mean");
  stats.batch_loss = g.value(loss).at(0);
  stats.mean_mil /= static_cast<double>(stats.mil_evals);
  if (stats.pix_evals_salient > 0) stats.mean_pix /= stats.pix_evals_salient;
  return loss;
}

}  // namespace

std::vector<WeakSample> load_weak_set(const std::string& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  std::vector<WeakSample> out;
  for (const ManifestImage& img : m.images) {
    for (const ManifestInstance& inst : img.instances) {
      out.push_back({resolve_path(manifest_path, img.file), inst.box, img.id, inst.id});
    }
  }
  if (out.empty()) throw DataError("load_weak_set: no instances in " + manifest_path);
  return out;
}

std::vector<SalientSample> load_salient_set(const std::string& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  std::vector<SalientSample> out;
  for (const ManifestImage& img : m.images) {
    if (img.instances.size() != 1 || !img.instances[0].mask_file) {
      throw DataError("load_salient_set: image " + std::to_string(img.id) + " in " +
                      manifest_path + " must have exactly one masked instance");
    }
    out.push_back({resolve_path(manifest_path, img.file),
                   resolve_path(manifest_path, *img.instances[0].mask_file), img.id});
  }
  if (out.empty()) throw DataError("load_salient_set: no images in " + manifest_path);
  return out;
}

std::vector<ValInstance> load_val_set(const std::string& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  std::vector<ValInstance> out;
  for (const ManifestImage& img : m.images) {
    for (const ManifestInstance& inst : img.instances) {
      if (!inst.mask_file) {
        throw DataError("load_val_set: instance " + std::to_string(inst.id) + " of image " +
                        std::to_string(img.id) + " has no mask_file in " + manifest_path);
      }
      out.push_back({resolve_path(manifest_path, img.file),
                     resolve_path(manifest_path, *inst.mask_file), inst.class_label, inst.box,
                     img.id, inst.id});
    }
  }
  if (out.empty()) throw DataError("load_val_set: no instances in " + manifest_path);
  return out;
}

Batch prepare_batch(const BatchPlan& plan, const std::vector<WeakSample>& weak,
                    const std::vector<SalientSample>& salient, const TrainConfig& cfg,
                    Rng& rng) {
  Batch b;
  for (int id : plan.weak_ids) {
    const WeakSample& s = weak.at(static_cast<size_t>(id));
    const Tensor img = to_float_image(read_pgm(s.image_file));
    b.weak.push_back(weak_augment(img, s.box, rng, cfg.patch_size));
    b.weak_tags.push_back("weak image=" + std::to_string(s.image_id) +
                          " instance=" + std::to_string(s.instance_id));
  }
  for (int id : plan.salient_ids) {
    const SalientSample& s = salient.at(static_cast<size_t>(id));
    const Tensor img = to_float_image(read_pgm(s.image_file));
    const BinaryMask mask = read_mask_pgm(s.mask_file);
    b.salient.push_back(
        salient_augment(img, mask, rng, cfg.effective_salient_resize(), cfg.patch_size));
    b.salient_tags.push_back("salient image=" + std::to_string(s.image_id));
  }
  return b;
}

StepStats train_step(Model& model, OptState& opt, const Batch& batch, const TrainConfig& cfg) {
  Graph g;
  BoundModel bm = bind_model(g, model, true);
  StepStats stats;
  const NodeId loss = build_batch_graph(g, bm, model, batch, cfg, stats);
  g.backward(loss);

  std::vector<ParamRef> refs = model_params(model);
  if (opt.velocity.empty()) {
    opt.velocity.resize(refs.size());
    for (size_t i = 0; i < refs.size(); ++i) {
      opt.velocity[i].assign(static_cast<size_t>(refs[i].tensor->numel()), 0.0);
    }
  }
  for (size_t i = 0; i < refs.size(); ++i) {
    const std::vector<double>* grad = g.grad(bm.ids[i]);
    if (!grad) continue;  // off-path parameter: frozen, no decay either
    std::vector<double>& v = opt.velocity[i];
    std::vector<double>& w = refs[i].tensor->data;
    const double wd = refs[i].is_bias ? 0.0 : cfg.weight_decay;
    for (size_t j = 0; j < w.size(); ++j) {
      v[j] = cfg.momentum * v[j] + (*grad)[j] + wd * w[j];
      w[j] -= cfg.lr * v[j];
    }
  }
  return stats;
}

double batch_loss_with_grad(Model& model, const Batch& batch, const TrainConfig& cfg,
                            std::vector<double>* grad_out, StepStats* stats_out,
                            const std::vector<double>* frozen_transfer) {
  Graph g;
  BoundModel bm = bind_model(g, model, grad_out != nullptr);
  StepStats stats;
  const NodeId loss = build_batch_graph(g, bm, model, batch, cfg, stats, frozen_transfer);
  if (grad_out) {
    g.backward(loss);
    grad_out->clear();
    for (const NodeId id : bm.ids) {
      const std::vector<double>* grad = g.grad(id);
      if (grad) {
        grad_out->insert(grad_out->end(), grad->begin(), grad->end());
      } else {
        grad_out->insert(grad_out->end(), static_cast<size_t>(g.value(id).numel()), 0.0);
      }
    }
  }
  if (stats_out) *stats_out = stats;
  return stats.batch_loss;
}

std::vector<double> flatten_params(Model& m) {
  std::vector<double> flat;
  for (const ParamRef& r : model_params(m)) {
    flat.insert(flat.end(), r.tensor->data.begin(), r.tensor->data.end());
  }
  return flat;
}

void unflatten_params(Model& m, const std::vector<double>& flat) {
  size_t pos = 0;
  for (const ParamRef& r : model_params(m)) {
    const size_t n = r.tensor->data.size();
    if (pos + n > flat.size()) throw DataError("unflatten_params: vector too short");
    std::copy(flat.begin() + static_cast<long>(pos), flat.begin() + static_cast<long>(pos + n),
              r.tensor->data.begin());
    pos += n;
  }
  if (pos != flat.size()) throw DataError("unflatten_params: vector too long");
}

ValMetrics validate(const Model& model, const std::vector<ValInstance>& val, Predictor which,
                    double alpha, int proxy_size) {
  std::vector<InstanceRecord> records;
  std::map<std::string, Tensor> image_cache;
  for (const ValInstance& v : val) {
    auto it = image_cache.find(v.image_file);
    if (it == image_cache.end()) {
      it = image_cache.emplace(v.image_file, to_float_image(read_pgm(v.image_file))).first;
    }
    InstanceRecord r;
    r.image_id = v.image_id;
    r.class_label = v.class_label;
    r.gt_mask = read_mask_pgm(v.mask_file);
    r.pred_mask = predict_box_mask(model, it->second, v.box, alpha, which, proxy_size);
    records.push_back(std::move(r));
  }
  return ValMetrics{miou_star(records), iou_at_k(records, 0.50), iou_at_k(records, 0.75)};
}

TrainResult train(const std::string& weak_manifest, const std::string& salient_manifest,
                  const std::string& val_manifest, const TrainConfig& cfg,
                  const std::string& checkpoint_out, const std::string& log_out) {
  const std::vector<WeakSample> weak = load_weak_set(weak_manifest);
  const std::vector<SalientSample> salient = load_salient_set(salient_manifest);
  std::vector<ValInstance> val;
  if (!val_manifest.empty()) val = load_val_set(val_manifest);

  TrainResult res;
  res.model = make_model(cfg.backbone, child_seed(cfg.seed, 0));
  OptState opt;

  std::ofstream log;
  if (!log_out.empty()) {
    log.open(log_out);
    if (!log) throw DataError("train: cannot open log " + log_out);
  }

  const Predictor val_pred =
      cfg.mode == TrainConfig::Mode::joint ? Predictor::blend : Predictor::weak_head;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SamplerConfig scfg = cfg.sampler_cfg;
    scfg.seed = child_seed(cfg.seed, 1000 + static_cast<uint64_t>(epoch));
    const EpochPlan plan =
        cfg.rs_sampling
            ? plan_epoch_rs(static_cast<int>(weak.size()), static_cast<int>(salient.size()), scfg)
            : plan_epoch(static_cast<int>(weak.size()), static_cast<int>(salient.size()), scfg);

    SeededRng aug_rng(child_seed(cfg.seed, 2000 + static_cast<uint64_t>(epoch)));
    double mil_sum = 0.0, pix_sum = 0.0;
    int mil_n = 0, pix_n = 0;
    for (const BatchPlan& bp : plan.batches) {
      const Batch b = prepare_batch(bp, weak, salient, cfg, aug_rng);
      const StepStats st = train_step(res.model, opt, b, cfg);
      if (st.pix_evals_weak != 0) {
        throw NumericError("train: pixel loss leaked into a weak sample");
      }
      mil_sum += st.mean_mil * st.mil_evals;
      mil_n += st.mil_evals;
      pix_sum += st.mean_pix * st.pix_evals_salient;
      pix_n += st.pix_evals_salient;
    }

    EpochLog lg;
    lg.epoch = epoch;
    lg.mean_mil = mil_n > 0 ? mil_sum / mil_n : 0.0;
    lg.mean_pix = pix_n > 0 ? pix_sum / pix_n : 0.0;
    if (!val.empty()) {
      const ValMetrics vm =
          validate(res.model, val, val_pred, cfg.loss_cfg.alpha, cfg.effective_salient_resize());
      lg.val_miou_star = vm.miou_star;
      lg.val_iou50 = vm.iou50;
      lg.val_iou75 = vm.iou75;
    }
    res.log.push_back(lg);
    if (log.is_open()) {
      nlohmann::ordered_json j;
      j["epoch"] = lg.epoch;
      j["mean_mil"] = lg.mean_mil;
      j["mean_pix"] = lg.mean_pix;
      j["val_miou_star"] = lg.val_miou_star;
      j["val_iou50"] = lg.val_iou50;
      j["val_iou75"] = lg.val_iou75;
      log << j.dump() << "\n" << std::flush;
    }
  }

  if (!checkpoint_out.empty()) {
    save_checkpoint(checkpoint_out, res.model, cfg.epochs, cfg.seed);
  }
  return res;
}

void save_checkpoint(const std::string& path, const Model& model, int epochs_trained,
                     uint64_t seed) {
  std::map<std::string, Tensor> entries = model_to_entries(model);
  entries.emplace("meta/epochs", Tensor::scalar(epochs_trained));
  entries.emplace("meta/seed", Tensor::scalar(static_cast<double>(seed)));
  write_tensor_archive(path, entries);
}

Model load_checkpoint(const std::string& path) {
  return model_from_entries(read_tensor_archive(path));
}

}  // namespace boxseg

#include "boxseg/proxymask.hpp"

#include <algorithm>
#include <limits>

#include "boxseg/augment.hpp"
#include "boxseg/errors.hpp"

namespace boxseg {

Tensor forward_scores(const Model& m, const Tensor& image, Predictor which, double alpha) {
  if (image.ndim() != 3 || image.shape[0] != m.cfg.in_channels) {
    throw DataError("forward_scores: image must be [" + std::to_string(m.cfg.in_channels) +
                    ",H,W], got " + shape_to_string(image.shape));
  }
  const int H = image.shape[1], W = image.shape[2];
  Graph g;
  const NodeId img = g.input(image, false);
  const BackboneNodes bb = bind_backbone(g, m.backbone, false);
  const NodeId feats = backbone_forward(g, img, bb, m.cfg);

  if (which == Predictor::weak_head) {
    const HeadNodes weak = bind_head(g, m.weak_head, false);
    return g.value(head_forward(g, feats, weak, H, W, m.cfg.slope));
  }

  const HeadNodes salient = bind_head(g, m.salient_head, false);
  const HeadParams transferred = weight_transfer(m.weak_head, m.mlp);
  const HeadNodes trans = bind_head(g, transferred, false);
  const Tensor& sa = g.value(head_forward(g, feats, salient, H, W, m.cfg.slope));
  const Tensor& st = g.value(head_forward(g, feats, trans, H, W, m.cfg.slope));
  Tensor out({H, W});
  for (int i = 0; i < out.numel(); ++i) out.at(i) = alpha * sa.at(i) + (1.0 - alpha) * st.at(i);
  return out;
}

BinaryMask predict_box_mask(const Model& m, const Tensor& image, const Box& gt_box,
                            double alpha, Predictor which, int proxy_size) {
  const ImagePatch patch = proxy_crop(image, gt_box, proxy_size);
  const Tensor scores = forward_scores(m, patch.image, which, alpha);

  // Resize scores back to box size through the shared bilinear kernel; the
  // map is 2-D so lift to a single channel either side.
  Tensor chw({1, proxy_size, proxy_size});
  chw.data = scores.data;
  const Tensor back = resize_bilinear(chw, gt_box.h, gt_box.w);

  BinaryMask full(image.shape[1], image.shape[2]);
  for (int y = 0; y < gt_box.h; ++y) {
    for (int x = 0; x < gt_box.w; ++x) {
      if (back.at3(0, y, x) > 0.5) full.at(gt_box.y + y, gt_box.x + x) = 1;
    }
  }
  return full;
}

BinaryMask predict_proxy(const Model& m, const Tensor& image, const Box& gt_box, double alpha,
                         int proxy_size) {
  return predict_box_mask(m, image, gt_box, alpha, Predictor::blend, proxy_size);
}

LabelMap merge_masks(const std::vector<std::pair<int, BinaryMask>>& instances) {
  LabelMap lm;
  if (instances.empty()) return lm;
  lm.height = instances[0].second.height;
  lm.width = instances[0].second.width;
  lm.ids.assign(static_cast<size_t>(lm.height) * lm.width, -1);

  std::vector<long long> areas;
  std::vector<int> seen;
  for (const auto& [id, mask] : instances) {
    if (mask.height != lm.height || mask.width != lm.width) {
      throw DataError("merge_masks: mask dimensions differ across instances");
    }
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) {
      throw DataError("merge_masks: duplicate instance id " + std::to_string(id));
    }
    seen.push_back(id);
    areas.push_back(mask.count());
  }

  // Smaller pre-merge area wins a contested pixel; ties go to the lower id.
  std::vector<long long> best_area(lm.ids.size(), std::numeric_limits<long long>::max());
  for (size_t k = 0; k < instances.size(); ++k) {
    const auto& [id, mask] = instances[k];
    for (size_t i = 0; i < mask.bits.size(); ++i) {
      if (!mask.bits[i]) continue;
      if (areas[k] < best_area[i] || (areas[k] == best_area[i] && id < lm.ids[i])) {
        best_area[i] = areas[k];
        lm.ids[i] = id;
      }
    }
  }
  return lm;
}

BinaryMask mask_from_label_map(const LabelMap& lm, int id) {
  BinaryMask m(lm.height, lm.width);
  for (size_t i = 0; i < lm.ids.size(); ++i) m.bits[i] = lm.ids[i] == id ? 1 : 0;
  return m;
}

double proxy_agreement(const BinaryMask& mask, const Box& gt_box) {
  const std::optional<Box> bb = bbox_of_mask(mask);
  return bb ? box_iou(*bb, gt_box) : 0.0;
}

std::vector<ProxyAnnotation> proxy_image(const Model& m, const Tensor& image,
                                         const std::vector<ManifestInstance>& instances,
                                         double alpha, int proxy_size) {
  std::vector<std::pair<int, BinaryMask>> predicted;
  for (const ManifestInstance& inst : instances) {
    predicted.emplace_back(inst.id, predict_proxy(m, image, inst.box, alpha, proxy_size));
  }
  const LabelMap lm = merge_masks(predicted);

  std::vector<ProxyAnnotation> anns;
  for (const ManifestInstance& inst : instances) {
    ProxyAnnotation a;
    a.instance_id = inst.id;
    a.class_label = inst.class_label;
    a.gt_box = inst.box;
    a.mask = mask_from_label_map(lm, inst.id);
    a.agreement = proxy_agreement(a.mask, inst.box);
    anns.push_back(std::move(a));
  }
  return anns;
}

std::pair<std::vector<ProxyAnnotation>, double> drop_masks(std::vector<ProxyAnnotation> anns,
                                                           double threshold) {
  if (anns.empty()) throw DataError("drop_masks: no annotations");
  if (threshold < 0.0 || threshold > 1.0) {
    throw DataError("drop_masks: threshold " + std::to_string(threshold) + " outside [0,1]");
  }
  int ignored = 0;
  for (ProxyAnnotation& a : anns) {
    a.ignore = a.agreement < threshold;
    ignored += a.ignore;
  }
  return {std::move(anns), static_cast<double>(ignored) / static_cast<double>(anns.size())};
}

}  // namespace boxseg

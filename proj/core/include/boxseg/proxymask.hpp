#pragma once

#include <string>
#include <utility>
#include <vector>

#include "boxseg/geometry.hpp"
#include "boxseg/heads.hpp"
#include "boxseg/manifest.hpp"

namespace boxseg {

// Which score map drives a prediction: the alpha-blend of the salient and
// transferred heads (the proxy-generation choice) or the weak head alone
// (baseline / mil_only models).
enum class Predictor { blend, weak_head };

// Full-resolution probability map for an input image [C,H,W] -> [H,W].
Tensor forward_scores(const Model& m, const Tensor& image, Predictor which, double alpha);

// Crop the GT box, resize to proxy_size, predict the blend, resize the scores
// back to box size, threshold strictly above 0.5, paste at the box into an
// image-sized mask.
BinaryMask predict_proxy(const Model& m, const Tensor& image, const Box& gt_box, double alpha,
                         int proxy_size = 320);

// Same pipeline with a selectable predictor (used for validation).
BinaryMask predict_box_mask(const Model& m, const Tensor& image, const Box& gt_box,
                            double alpha, Predictor which, int proxy_size);

struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> ids;  // -1 = background

  int at(int r, int c) const { return ids[static_cast<size_t>(r) * width + c]; }
};

// Resolve overlaps: a contested pixel goes to the instance with the smallest
// pre-merge foreground area; ties to the lowest id.
LabelMap merge_masks(const std::vector<std::pair<int, BinaryMask>>& instances);

BinaryMask mask_from_label_map(const LabelMap& lm, int id);

struct ProxyAnnotation {
  int instance_id = 0;
  std::string class_label;
  Box gt_box;
  BinaryMask mask;  // post-merge, image resolution
  bool ignore = false;
  double agreement = 0.0;  // box IoU of the mask's bbox vs gt_box; 0 if empty
};

double proxy_agreement(const BinaryMask& mask, const Box& gt_box);

// Predict + merge + score agreement for one image's instances.
std::vector<ProxyAnnotation> proxy_image(const Model& m, const Tensor& image,
                                         const std::vector<ManifestInstance>& instances,
                                         double alpha, int proxy_size = 320);

// Flag ignore := agreement < threshold; masks are retained either way.
// Returns updated annotations and the drop rate.
std::pair<std::vector<ProxyAnnotation>, double> drop_masks(std::vector<ProxyAnnotation> anns,
                                                           double threshold);

}  // namespace boxseg

#pragma once

#include <map>
#include <string>
#include <vector>

#include "boxseg/geometry.hpp"

namespace boxseg {

// One GT instance paired with its prediction (score defaults to 1.0 when
// predictions are generated per GT instance, as in the proxy pipeline).
struct InstanceRecord {
  int image_id = 0;
  std::string class_label;
  BinaryMask gt_mask;
  BinaryMask pred_mask;
  double score = 1.0;
};

// 100 * fraction of records whose mask IoU is strictly above k.
double iou_at_k(const std::vector<InstanceRecord>& records, double k);

// Mean over classes of the per-class mean instance IoU.
double miou_star(const std::vector<InstanceRecord>& records);
std::map<std::string, double> per_class_miou(const std::vector<InstanceRecord>& records);

// Detection-style AP with decoupled predictions and ground truths.
struct ApPrediction {
  int image_id = 0;
  std::string class_label;
  BinaryMask mask;
  double score = 0.0;
};
struct ApGroundTruth {
  int image_id = 0;
  std::string class_label;
  BinaryMask mask;
};
struct ApResult {
  std::map<std::string, double> per_class;
  double map = 0.0;  // mean over classes with at least one GT
};

// Per class: sort predictions by score descending, greedily match each to the
// highest-IoU unmatched GT in the same image at IoU >= threshold, then
// 101-point-interpolate the precision-recall curve.
ApResult average_precision(const std::vector<ApPrediction>& preds,
                           const std::vector<ApGroundTruth>& gts, double iou_threshold);

struct MetricsReport {
  double miou_star = 0.0;
  std::map<std::string, double> per_class_miou;
  std::map<double, double> iou_at;  // threshold -> percentage
  std::map<double, double> ap_at;   // threshold -> mAP
  int instances = 0;
  int ignored = 0;  // records excluded upstream (reported for transparency)
};

// Standard report: IoU@{50,75} plus mAP at {0.25, 0.50, 0.70, 0.75}, with AP
// predictions taken from the records themselves.
MetricsReport compute_report(const std::vector<InstanceRecord>& records, int ignored = 0);

std::string report_to_json(const MetricsReport& r);
std::string report_to_table(const MetricsReport& r);

}  // namespace boxseg

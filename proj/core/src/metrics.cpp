#include "boxseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "boxseg/errors.hpp"

namespace boxseg {

double iou_at_k(const std::vector<InstanceRecord>& records, double k) {
  if (records.empty()) throw DataError("iou_at_k: no records");
  int hits = 0;
  for (const InstanceRecord& r : records) hits += mask_iou(r.pred_mask, r.gt_mask) > k;
  return 100.0 * hits / static_cast<double>(records.size());
}

std::map<std::string, double> per_class_miou(const std::vector<InstanceRecord>& records) {
  std::map<std::string, std::pair<double, int>> acc;  // class -> (sum, count)
  for (const InstanceRecord& r : records) {
    auto& [sum, count] = acc[r.class_label];
    sum += mask_iou(r.pred_mask, r.gt_mask);
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [cls, sc] : acc) out[cls] = sc.first / sc.second;
  return out;
}

double miou_star(const std::vector<InstanceRecord>& records) {
  if (records.empty()) throw DataError("miou_star: no records");
  const std::map<std::string, double> per_class = per_class_miou(records);
  double sum = 0.0;
  for (const auto& [cls, v] : per_class) sum += v;
  return sum / static_cast<double>(per_class.size());
}

ApResult average_precision(const std::vector<ApPrediction>& preds,
                           const std::vector<ApGroundTruth>& gts, double iou_threshold) {
  std::set<std::string> classes;
  for (const ApGroundTruth& g : gts) classes.insert(g.class_label);

  ApResult res;
  double sum = 0.0;
  for (const std::string& cls : classes) {
    std::vector<int> gt_idx;
    for (size_t i = 0; i < gts.size(); ++i) {
      if (gts[i].class_label == cls) gt_idx.push_back(static_cast<int>(i));
    }
    std::vector<int> pred_idx;
    for (size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].class_label == cls) pred_idx.push_back(static_cast<int>(i));
    }
    // Descending score, stable so insertion order breaks ties.
    std::stable_sort(pred_idx.begin(), pred_idx.end(),
                     [&](int a, int b) { return preds[a].score > preds[b].score; });

    std::vector<bool> gt_used(gt_idx.size(), false);
    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (int pi : pred_idx) {
      const ApPrediction& p = preds[static_cast<size_t>(pi)];
      int best = -1;
      double best_iou = 0.0;
      for (size_t j = 0; j < gt_idx.size(); ++j) {
        if (gt_used[j]) continue;
        const ApGroundTruth& g = gts[static_cast<size_t>(gt_idx[j])];
        if (g.image_id != p.image_id) continue;
        const double iou = mask_iou(p.mask, g.mask);
        if (iou >= iou_threshold && iou > best_iou) {
          best_iou = iou;
          best = static_cast<int>(j);
        }
      }
      if (best >= 0) {
        gt_used[static_cast<size_t>(best)] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_idx.size()));
    }

    // 101-point interpolation: mean over r in {0, 0.01, ..., 1} of the best
    // precision at recall >= r.
    double ap = 0.0;
    for (int ri = 0; ri <= 100; ++ri) {
      const double r = ri / 100.0;
      double best_p = 0.0;
      for (size_t i = 0; i < precision.size(); ++i) {
        if (recall[i] >= r - 1e-12) best_p = std::max(best_p, precision[i]);
      }
      ap += best_p;
    }
    ap /= 101.0;
    res.per_class[cls] = ap;
    sum += ap;
  }
  res.map = classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
  return res;
}

MetricsReport compute_report(const std::vector<InstanceRecord>& records, int ignored) {
  MetricsReport rep;
  rep.instances = static_cast<int>(records.size());
  rep.ignored = ignored;
  rep.miou_star = miou_star(records);
  rep.per_class_miou = per_class_miou(records);
  for (double k : {0.50, 0.75}) rep.iou_at[k] = iou_at_k(records, k);

  std::vector<ApPrediction> preds;
  std::vector<ApGroundTruth> gts;
  for (const InstanceRecord& r : records) {
    preds.push_back({r.image_id, r.class_label, r.pred_mask, r.score});
    gts.push_back({r.image_id, r.class_label, r.gt_mask});
  }
  for (double t : {0.25, 0.50, 0.70, 0.75}) {
    rep.ap_at[t] = average_precision(preds, gts, t).map;
  }
  return rep;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["instances"] = r.instances;
  j["ignored"] = r.ignored;
  j["miou_star"] = r.miou_star;
  j["per_class_miou"] = r.per_class_miou;
  auto key = [](double t) {
    std::ostringstream os;
    os << static_cast<int>(std::lround(t * 100));
    return os.str();
  };
  for (const auto& [t, v] : r.iou_at) j["iou_at"][key(t)] = v;
  for (const auto& [t, v] : r.ap_at) j["ap_at"][key(t)] = v;
  return j.dump(2) + "\n";
}

std::string report_to_table(const MetricsReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "instances " << r.instances << "  (ignored upstream: " << r.ignored << ")\n";
  os << "metric      value\n";
  os << "mIoU*       " << r.miou_star << "\n";
  for (const auto& [t, v] : r.iou_at) {
    os << "IoU@" << static_cast<int>(std::lround(t * 100)) << "      " << v << "\n";
  }
  for (const auto& [t, v] : r.ap_at) {
    os << "AP@" << static_cast<int>(std::lround(t * 100)) << "       " << v << "\n";
  }
  for (const auto& [cls, v] : r.per_class_miou) {
    os << "mIoU[" << cls << "] " << v << "\n";
  }
  return os.str();
}

}  // namespace boxseg

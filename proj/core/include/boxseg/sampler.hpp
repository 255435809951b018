#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace boxseg {

struct SamplerConfig {
  int weak_per_batch = 9;     // a
  int salient_per_batch = 7;  // b
  uint64_t seed = 0;
};

struct BatchPlan {
  std::vector<int> weak_ids;
  std::vector<int> salient_ids;
  std::vector<bool> salient_is_pad;  // parallel to salient_ids
};

struct EpochPlan {
  std::vector<BatchPlan> batches;
};

// Fixed-ratio epoch: ceil(n_salient/b) batches of exactly (a weak, b salient).
// Every salient id appears exactly once; a ragged last batch is padded by
// re-drawing already-used salient ids (flagged). Weak ids come from a
// shuffled stream that reshuffles on exhaustion.
EpochPlan plan_epoch(int n_weak, int n_salient, const SamplerConfig& cfg);

// Baseline "RS": same batch count and size, every slot drawn uniformly from
// the union of both pools, no ratio guarantee.
EpochPlan plan_epoch_rs(int n_weak, int n_salient, const SamplerConfig& cfg);

std::string plan_to_json(const EpochPlan& plan);

}  // namespace boxseg

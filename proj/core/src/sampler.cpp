#include "boxseg/sampler.hpp"

#include <numeric>

#include <json.hpp>

#include "boxseg/errors.hpp"
#include "boxseg/rng.hpp"

namespace boxseg {

namespace {

void check(int n_weak, int n_salient, const SamplerConfig& cfg) {
  if (cfg.weak_per_batch < 1 || cfg.salient_per_batch < 1) {
    throw DataError("sampler: per-batch counts must be >= 1");
  }
  if (n_salient < cfg.salient_per_batch) {
    throw DataError("sampler: " + std::to_string(n_salient) + " salient samples < batch quota " +
                    std::to_string(cfg.salient_per_batch));
  }
  if (n_weak < cfg.weak_per_batch) {
    throw DataError("sampler: " + std::to_string(n_weak) + " weak samples < batch quota " +
                    std::to_string(cfg.weak_per_batch));
  }
}

}  // namespace

EpochPlan plan_epoch(int n_weak, int n_salient, const SamplerConfig& cfg) {
  check(n_weak, n_salient, cfg);
  const int a = cfg.weak_per_batch, b = cfg.salient_per_batch;

  SeededRng rng_s(child_seed(cfg.seed, 0));
  std::vector<int> salient(static_cast<size_t>(n_salient));
  std::iota(salient.begin(), salient.end(), 0);
  shuffle(salient, rng_s);

  SeededRng rng_w(child_seed(cfg.seed, 1));
  std::vector<int> weak(static_cast<size_t>(n_weak));
  std::iota(weak.begin(), weak.end(), 0);
  shuffle(weak, rng_w);
  size_t weak_cursor = 0;

  const int n_batches = (n_salient + b - 1) / b;
  EpochPlan plan;
  size_t salient_cursor = 0;
  for (int i = 0; i < n_batches; ++i) {
    BatchPlan batch;
    for (int j = 0; j < b; ++j) {
      if (salient_cursor < salient.size()) {
        batch.salient_ids.push_back(salient[salient_cursor++]);
        batch.salient_is_pad.push_back(false);
      } else {
        batch.salient_ids.push_back(salient[static_cast<size_t>(rng_s.uniform_int(n_salient))]);
        batch.salient_is_pad.push_back(true);
      }
    }
    for (int j = 0; j < a; ++j) {
      if (weak_cursor == weak.size()) {
        shuffle(weak, rng_w);
        weak_cursor = 0;
      }
      batch.weak_ids.push_back(weak[weak_cursor++]);
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

EpochPlan plan_epoch_rs(int n_weak, int n_salient, const SamplerConfig& cfg) {
  check(n_weak, n_salient, cfg);
  const int a = cfg.weak_per_batch, b = cfg.salient_per_batch;
  const int n_batches = (n_salient + b - 1) / b;

  SeededRng rng(child_seed(cfg.seed, 2));
  EpochPlan plan;
  for (int i = 0; i < n_batches; ++i) {
    BatchPlan batch;
    for (int j = 0; j < a + b; ++j) {
      const int pick = rng.uniform_int(n_weak + n_salient);
      if (pick < n_weak) {
        batch.weak_ids.push_back(pick);
      } else {
        batch.salient_ids.push_back(pick - n_weak);
        batch.salient_is_pad.push_back(false);
      }
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

std::string plan_to_json(const EpochPlan& plan) {
  nlohmann::ordered_json j;
  j["batches"] = nlohmann::ordered_json::array();
  for (const BatchPlan& b : plan.batches) {
    nlohmann::ordered_json jb;
    jb["weak"] = b.weak_ids;
    jb["salient"] = b.salient_ids;
    jb["salient_pad"] = b.salient_is_pad;
    j["batches"].push_back(std::move(jb));
  }
  return j.dump(2);
}

}  // namespace boxseg

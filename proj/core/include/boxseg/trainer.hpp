#pragma once

#include <string>
#include <vector>

#include "boxseg/augment.hpp"
#include "boxseg/heads.hpp"
#include "boxseg/losses.hpp"
#include "boxseg/proxymask.hpp"
#include "boxseg/sampler.hpp"

namespace boxseg {

struct TrainConfig {
  double lr = 4e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 1;
  LossConfig loss_cfg;
  SamplerConfig sampler_cfg;  // its seed field is ignored: epochs derive their own
  enum class Mode { joint, mil_only };
  Mode mode = Mode::joint;
  uint64_t seed = 0;
  int patch_size = 288;
  int salient_resize = 0;  // 0 = auto: patch_size + max(1, patch_size/9) (288 -> 320)
  bool rs_sampling = false;
  BackboneConfig backbone;

  int effective_salient_resize() const {
    return salient_resize > 0 ? salient_resize : patch_size + std::max(1, patch_size / 9);
  }
};

// Flattened training units: one weak sample per annotated instance, one
// salient sample per image. Paths are resolved against the manifest.
struct WeakSample {
  std::string image_file;
  Box box;
  int image_id = 0;
  int instance_id = 0;
};
struct SalientSample {
  std::string image_file;
  std::string mask_file;
  int image_id = 0;
};
struct ValInstance {
  std::string image_file;
  std::string mask_file;
  std::string class_label;
  Box box;
  int image_id = 0;
  int instance_id = 0;
};

std::vector<WeakSample> load_weak_set(const std::string& manifest_path);
std::vector<SalientSample> load_salient_set(const std::string& manifest_path);
std::vector<ValInstance> load_val_set(const std::string& manifest_path);

struct Batch {
  std::vector<ImagePatch> weak;     // box attached
  std::vector<ImagePatch> salient;  // mask + box attached
  std::vector<std::string> weak_tags;  // diagnostics for error reporting
  std::vector<std::string> salient_tags;
};

Batch prepare_batch(const BatchPlan& plan, const std::vector<WeakSample>& weak,
                    const std::vector<SalientSample>& salient, const TrainConfig& cfg,
                    Rng& rng);

// Momentum buffers aligned with model_params() order; allocated on first step.
struct OptState {
  std::vector<std::vector<double>> velocity;
};

struct StepStats {
  double batch_loss = 0.0;
  double mean_mil = 0.0;
  double mean_pix = 0.0;
  int mil_evals = 0;
  int pix_evals_salient = 0;
  int pix_evals_weak = 0;  // the lambda switch keeps this at zero
};

// One SGD step: per-sample forward (weak -> MIL; salient -> MIL through the
// weak head plus, in joint mode, the blended pixel loss), batch loss = mean
// of per-sample totals, momentum update with weight decay on non-bias
// parameters. Parameters off every loss path are left untouched.
StepStats train_step(Model& model, OptState& opt, const Batch& batch, const TrainConfig& cfg);

// The same batch loss as a plain function of the parameters, for gradient
// checking. grad_out (optional) receives d(loss)/d(params) flattened in
// model_params() order, zeros for parameters off the loss path. The transfer
// input is a stop-gradient constant; frozen_transfer (optional) pins its value
// so a finite-difference probe sees the exact function the graph computes.
double batch_loss_with_grad(Model& model, const Batch& batch, const TrainConfig& cfg,
                            std::vector<double>* grad_out, StepStats* stats = nullptr,
                            const std::vector<double>* frozen_transfer = nullptr);

std::vector<double> flatten_params(Model& m);
void unflatten_params(Model& m, const std::vector<double>& flat);

struct ValMetrics {
  double miou_star = 0.0;
  double iou50 = 0.0;
  double iou75 = 0.0;
};

// Proxy-style evaluation of box crops against GT masks.
ValMetrics validate(const Model& model, const std::vector<ValInstance>& val, Predictor which,
                    double alpha, int proxy_size);

struct EpochLog {
  int epoch = 0;
  double mean_mil = 0.0;
  double mean_pix = 0.0;
  double val_miou_star = -1.0;  // -1 = no validation split
  double val_iou50 = -1.0;
  double val_iou75 = -1.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

// Full loop. val_manifest may be empty (skips validation); checkpoint_out /
// log_out may be empty (skips writing). Validation predicts with the blend in
// joint mode and with the weak head in mil_only mode.
TrainResult train(const std::string& weak_manifest, const std::string& salient_manifest,
                  const std::string& val_manifest, const TrainConfig& cfg,
                  const std::string& checkpoint_out, const std::string& log_out);

void save_checkpoint(const std::string& path, const Model& model, int epochs_trained,
                     uint64_t seed);
Model load_checkpoint(const std::string& path);

}  // namespace boxseg

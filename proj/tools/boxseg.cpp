// Command-line front end: dataset generation, training, proxy-mask
// generation, evaluation, and the gradient audit. Exit codes: 0 ok,
// 1 usage, 2 data error, 3 numeric error.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "boxseg/errors.hpp"
#include "boxseg/gradsuite.hpp"
#include "boxseg/manifest.hpp"
#include "boxseg/mask_io.hpp"
#include "boxseg/metrics.hpp"
#include "boxseg/proxymask.hpp"
#include "boxseg/synthdata.hpp"
#include "boxseg/trainer.hpp"

namespace fs = std::filesystem;
using boxseg::DataError;
using boxseg::NumericError;
using ojson = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- option plumbing -------------------------------------------------------

// Config-file values are injected as leading arguments; TakeLast makes the
// explicit command line win over them.
template <typename T>
CLI::Option* opt(CLI::App* cmd, const std::string& name, T& var, const std::string& desc) {
  return cmd->add_option(name, var, desc)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

CLI::Option* flag(CLI::App* cmd, const std::string& name, bool& var, const std::string& desc) {
  return cmd->add_flag(name, var, desc)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

// Flat JSON object -> "--key=value" tokens (booleans become bare flags; a
// "command" entry must match the invoked subcommand and is not forwarded).
std::vector<std::string> config_to_args(const std::string& path, const std::string& subcmd) {
  std::ifstream in(path);
  if (!in) throw UsageError("--config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("--config: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("--config: " + path + " must hold a JSON object");

  std::vector<std::string> out;
  for (const auto& [key, value] : j.items()) {
    if (key == "command") {
      if (!value.is_string() || value.get<std::string>() != subcmd) {
        throw UsageError("--config: file is for command '" + value.dump() + "', not '" +
                         subcmd + "'");
      }
      continue;
    }
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back("--" + key);
      continue;
    }
    if (value.is_structured()) {
      throw UsageError("--config: key '" + key + "' must be a scalar");
    }
    const std::string v = value.is_string() ? value.get<std::string>() : value.dump();
    out.push_back("--" + key + "=" + v);
  }
  return out;
}

void write_echo(const std::string& path, const ojson& j) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string default_echo_path(const std::string& primary_output) {
  const fs::path p(primary_output);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  return (dir / "run_config.json").string();
}

// Pure-lexical relative path so identical layouts yield identical manifests.
std::string relative_to(const std::string& target, const fs::path& base_dir) {
  const fs::path t = fs::absolute(target).lexically_normal();
  const fs::path b = fs::absolute(base_dir).lexically_normal();
  const fs::path rel = t.lexically_proximate(b);
  return rel.generic_string();
}

std::array<int, 4> parse_channels(const std::string& s) {
  std::array<int, 4> out{};
  size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    const size_t next = s.find(',', pos);
    const bool last = i == 3;
    if (last != (next == std::string::npos)) {
      throw UsageError("--channels: expected four comma-separated widths, got '" + s + "'");
    }
    const std::string tok = s.substr(pos, last ? std::string::npos : next - pos);
    try {
      out[static_cast<size_t>(i)] = std::stoi(tok);
    } catch (const std::exception&) {
      throw UsageError("--channels: bad width '" + tok + "'");
    }
    if (out[static_cast<size_t>(i)] < 1) throw UsageError("--channels: widths must be >= 1");
    pos = next + 1;
  }
  return out;
}

std::pair<int, int> parse_ratio(const std::string& s) {
  const size_t colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("--ratio: expected 'weak:salient'");
  int w = 0, sal = 0;
  try {
    w = std::stoi(s.substr(0, colon));
    sal = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--ratio: bad counts in '" + s + "'");
  }
  if (w < 1 || sal < 1) throw UsageError("--ratio: both counts must be >= 1");
  return {w, sal};
}

}  // namespace

// ---- gen-data --------------------------------------------------------------

namespace {

struct GenDataArgs {
  std::string out;
  int count_salient = 20;
  int count_weak = 60;
  int count_val = 20;
  int image_size = 96;
  uint64_t seed = 0;
  std::string echo;
};

int run_gen_data(const GenDataArgs& a) {
  if (a.count_salient + a.count_weak + a.count_val == 0) {
    throw UsageError("gen-data: all counts are zero");
  }
  ojson echo{{"command", "gen-data"},
             {"out", a.out},
             {"count-salient", a.count_salient},
             {"count-weak", a.count_weak},
             {"count-val", a.count_val},
             {"image-size", a.image_size},
             {"seed", a.seed}};
  write_echo(a.echo.empty() ? (fs::path(a.out) / "run_config.json").string() : a.echo, echo);

  using boxseg::Split;
  const std::array<std::tuple<Split, int, const char*>, 3> jobs{
      std::tuple{Split::salient, a.count_salient, "salient"},
      std::tuple{Split::weak, a.count_weak, "weak"},
      std::tuple{Split::val, a.count_val, "val"}};
  for (const auto& [split, count, name] : jobs) {
    if (count <= 0) continue;
    boxseg::GenConfig cfg;
    cfg.image_size = a.image_size;
    cfg.count = count;
    cfg.seed = a.seed;
    const std::string manifest =
        boxseg::generate_dataset(split, cfg, (fs::path(a.out) / name).string());
    std::printf("%s: %d images -> %s\n", name, count, manifest.c_str());
  }
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string weak, salient, val;
  std::string checkpoint_out, log_out;
  std::string mode = "joint";
  std::string ratio = "9:7";
  std::string channels = "16,32,32,16";
  double alpha = 0.7;
  double smooth_weight = 0.05;
  double lr = 4e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 1;
  uint64_t seed = 0;
  int patch_size = 288;
  int salient_resize = 0;
  bool rs = false;
  std::string echo;
};

int run_train(const TrainArgs& a) {
  boxseg::TrainConfig cfg;
  cfg.lr = a.lr;
  cfg.momentum = a.momentum;
  cfg.weight_decay = a.weight_decay;
  cfg.epochs = a.epochs;
  cfg.loss_cfg.alpha = a.alpha;
  cfg.loss_cfg.smooth_weight = a.smooth_weight;
  std::tie(cfg.sampler_cfg.weak_per_batch, cfg.sampler_cfg.salient_per_batch) =
      parse_ratio(a.ratio);
  if (a.mode == "joint") {
    cfg.mode = boxseg::TrainConfig::Mode::joint;
  } else if (a.mode == "mil_only") {
    cfg.mode = boxseg::TrainConfig::Mode::mil_only;
  } else {
    throw UsageError("--mode: expected joint or mil_only");
  }
  cfg.seed = a.seed;
  cfg.patch_size = a.patch_size;
  cfg.salient_resize = a.salient_resize;
  cfg.rs_sampling = a.rs;
  cfg.backbone.channels = parse_channels(a.channels);

  ojson echo{{"command", "train"},
             {"weak", a.weak},
             {"salient", a.salient},
             {"val", a.val},
             {"checkpoint-out", a.checkpoint_out},
             {"log-out", a.log_out},
             {"mode", a.mode},
             {"ratio", a.ratio},
             {"channels", a.channels},
             {"alpha", a.alpha},
             {"smooth-weight", a.smooth_weight},
             {"lr", a.lr},
             {"momentum", a.momentum},
             {"weight-decay", a.weight_decay},
             {"epochs", a.epochs},
             {"seed", a.seed},
             {"patch-size", a.patch_size},
             {"salient-resize", a.salient_resize},
             {"rs", a.rs}};
  write_echo(a.echo.empty() ? default_echo_path(a.checkpoint_out) : a.echo, echo);

  for (const std::string& p : {a.checkpoint_out, a.log_out}) {
    if (!p.empty() && fs::path(p).has_parent_path()) {
      fs::create_directories(fs::path(p).parent_path());
    }
  }

  const boxseg::TrainResult res =
      boxseg::train(a.weak, a.salient, a.val, cfg, a.checkpoint_out, a.log_out);
  for (const boxseg::EpochLog& e : res.log) {
    std::printf("epoch %d: mil=%.6f pix=%.6f", e.epoch, e.mean_mil, e.mean_pix);
    if (e.val_miou_star >= 0.0) {
      std::printf(" val_miou*=%.4f val_iou@50=%.2f val_iou@75=%.2f", e.val_miou_star,
                  e.val_iou50, e.val_iou75);
    }
    std::printf("\n");
  }
  if (!a.checkpoint_out.empty()) {
    std::printf("checkpoint: %s\n", a.checkpoint_out.c_str());
  }
  return 0;
}

// ---- proxy -----------------------------------------------------------------

struct ProxyArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  double alpha = 0.7;
  double drop_thresh = 0.95;
  int proxy_size = 320;
  bool rle = false;
  std::string masks_dir = "proxy_masks";
  std::string echo;
};

int run_proxy(const ProxyArgs& a) {
  ojson echo{{"command", "proxy"},        {"checkpoint", a.checkpoint},
             {"manifest", a.manifest},    {"out", a.out},
             {"alpha", a.alpha},          {"drop-thresh", a.drop_thresh},
             {"proxy-size", a.proxy_size}, {"rle", a.rle},
             {"masks-dir", a.masks_dir}};
  write_echo(a.echo.empty() ? default_echo_path(a.out) : a.echo, echo);

  const boxseg::Model model = boxseg::load_checkpoint(a.checkpoint);
  const boxseg::Manifest in = boxseg::load_manifest(a.manifest);
  const fs::path out_path(a.out);
  const fs::path out_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  fs::create_directories(out_dir);

  // Predict and merge per image, then apply the agreement gate globally so
  // the reported drop rate covers the whole set.
  std::vector<boxseg::ProxyAnnotation> all;
  std::vector<size_t> image_of;
  for (size_t i = 0; i < in.images.size(); ++i) {
    const boxseg::ManifestImage& img = in.images[i];
    const boxseg::GrayImage gray =
        boxseg::read_pgm(boxseg::resolve_path(a.manifest, img.file));
    const auto image = boxseg::to_float_image(gray);
    std::vector<boxseg::ProxyAnnotation> anns =
        boxseg::proxy_image(model, image, img.instances, a.alpha, a.proxy_size);
    for (auto& ann : anns) {
      all.push_back(std::move(ann));
      image_of.push_back(i);
    }
  }
  auto [gated, drop_rate] = boxseg::drop_masks(std::move(all), a.drop_thresh);

  boxseg::Manifest out_manifest;
  out_manifest.images.resize(in.images.size());
  for (size_t i = 0; i < in.images.size(); ++i) {
    out_manifest.images[i].id = in.images[i].id;
    out_manifest.images[i].file =
        relative_to(boxseg::resolve_path(a.manifest, in.images[i].file), out_dir);
  }
  if (!a.rle) fs::create_directories(out_dir / a.masks_dir);
  for (size_t k = 0; k < gated.size(); ++k) {
    const boxseg::ProxyAnnotation& ann = gated[k];
    boxseg::ManifestInstance mi;
    mi.id = ann.instance_id;
    mi.class_label = ann.class_label;
    mi.box = ann.gt_box;
    mi.ignore = ann.ignore;
    mi.agreement = ann.agreement;
    if (a.rle) {
      mi.rle = boxseg::rle_encode(ann.mask);
    } else {
      char name[64];
      std::snprintf(name, sizeof name, "img_%05d_inst_%02d.pgm",
                    in.images[image_of[k]].id, ann.instance_id);
      const std::string rel = a.masks_dir + "/" + name;
      boxseg::write_mask_pgm((out_dir / rel).string(), ann.mask);
      mi.mask_file = rel;
    }
    out_manifest.images[image_of[k]].instances.push_back(std::move(mi));
  }
  boxseg::save_manifest(a.out, out_manifest);
  std::printf("proxy manifest: %s\n", a.out.c_str());
  std::printf("drop rate: %.4f (threshold %.2f, %zu instances)\n", drop_rate, a.drop_thresh,
              gated.size());
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out;
  bool include_ignored = false;
  std::string echo;
};

boxseg::BinaryMask instance_mask(const std::string& manifest_path,
                                 const boxseg::ManifestInstance& inst, const char* role) {
  if (inst.mask_file) {
    return boxseg::read_mask_pgm(boxseg::resolve_path(manifest_path, *inst.mask_file));
  }
  if (inst.rle) return boxseg::rle_decode(*inst.rle);
  throw DataError(std::string(role) + " instance " + std::to_string(inst.id) +
                  " has neither mask_file nor rle");
}

int run_eval(const EvalArgs& a) {
  if (!a.out.empty() || !a.echo.empty()) {
    ojson echo{{"command", "eval"},
               {"pred", a.pred},
               {"gt", a.gt},
               {"out", a.out},
               {"include-ignored", a.include_ignored}};
    write_echo(a.echo.empty() ? default_echo_path(a.out) : a.echo, echo);
  }

  const boxseg::Manifest pred = boxseg::load_manifest(a.pred);
  const boxseg::Manifest gt = boxseg::load_manifest(a.gt);

  std::map<std::pair<int, int>, const boxseg::ManifestInstance*> pred_index;
  for (const boxseg::ManifestImage& img : pred.images) {
    for (const boxseg::ManifestInstance& inst : img.instances) {
      if (!pred_index.emplace(std::pair{img.id, inst.id}, &inst).second) {
        throw DataError("eval: duplicate prediction for image " + std::to_string(img.id) +
                        " instance " + std::to_string(inst.id));
      }
    }
  }

  std::vector<boxseg::InstanceRecord> records;
  int ignored = 0;
  for (const boxseg::ManifestImage& img : gt.images) {
    for (const boxseg::ManifestInstance& inst : img.instances) {
      const auto it = pred_index.find({img.id, inst.id});
      if (it == pred_index.end()) {
        throw DataError("eval: no prediction for image " + std::to_string(img.id) +
                        " instance " + std::to_string(inst.id));
      }
      const boxseg::ManifestInstance& p = *it->second;
      if (p.ignore.value_or(false) && !a.include_ignored) {
        ++ignored;
        continue;
      }
      boxseg::InstanceRecord r;
      r.image_id = img.id;
      r.class_label = inst.class_label;
      r.gt_mask = instance_mask(a.gt, inst, "gt");
      r.pred_mask = instance_mask(a.pred, p, "pred");
      records.push_back(std::move(r));
    }
  }

  const boxseg::MetricsReport report = boxseg::compute_report(records, ignored);
  std::fputs(boxseg::report_to_table(report).c_str(), stdout);
  if (!a.out.empty()) {
    if (fs::path(a.out).has_parent_path()) {
      fs::create_directories(fs::path(a.out).parent_path());
    }
    std::ofstream f(a.out);
    if (!f) throw DataError("cannot write " + a.out);
    std::string j = boxseg::report_to_json(report);
    if (j.empty() || j.back() != '\n') j += '\n';
    f << j;
  }
  return 0;
}

// ---- gradcheck -------------------------------------------------------------

struct GradArgs {
  uint64_t seed = 1;
  int seeds = 20;
  int patch = 16;
  double eps = 1e-5;
  double tol = 1e-4;
  bool no_composite = false;
};

int run_gradcheck(const GradArgs& a) {
  boxseg::GradSuiteConfig cfg;
  cfg.seed = a.seed;
  cfg.seeds = a.seeds;
  cfg.patch = a.patch;
  cfg.eps = a.eps;
  cfg.tol = a.tol;
  cfg.composite = !a.no_composite;
  const boxseg::GradSuiteReport rep = boxseg::run_grad_suite(cfg);
  for (const boxseg::GradTargetResult& t : rep.targets) {
    std::printf("%-12s max_rel_err=%.3e (param %d: analytic=%.6e numeric=%.6e) over %d params\n",
                t.name.c_str(), t.worst.max_rel_err, t.worst.worst_index,
                t.worst.analytic_at_worst, t.worst.numeric_at_worst, t.params_checked);
  }
  std::printf("gradcheck %s: max_rel_err=%.3e tol=%.1e\n", rep.pass ? "PASS" : "FAIL",
              rep.max_rel_err, cfg.tol);
  return rep.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw(argv + 1, argv + argc);

  CLI::App app{"box-supervised class-agnostic segmentation pipeline"};
  app.require_subcommand(1);

  GenDataArgs gd;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  opt(gen, "--out", gd.out, "output root directory")->required();
  opt(gen, "--count-salient", gd.count_salient, "salient (single object, masked) images");
  opt(gen, "--count-weak", gd.count_weak, "weak (boxes only) images");
  opt(gen, "--count-val", gd.count_val, "validation images (masks published)");
  opt(gen, "--image-size", gd.image_size, "square image side, >= 48");
  opt(gen, "--seed", gd.seed, "master seed");
  opt(gen, "--echo-config", gd.echo, "where to write the effective config");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train the three-headed model");
  opt(train_cmd, "--weak", tr.weak, "weak training manifest")->required();
  opt(train_cmd, "--salient", tr.salient, "salient training manifest")->required();
  opt(train_cmd, "--val", tr.val, "validation manifest (optional)");
  opt(train_cmd, "--checkpoint-out", tr.checkpoint_out, "checkpoint file to write")->required();
  opt(train_cmd, "--log-out", tr.log_out, "JSONL epoch log (optional)");
  opt(train_cmd, "--mode", tr.mode, "joint | mil_only");
  opt(train_cmd, "--ratio", tr.ratio, "weak:salient samples per batch");
  opt(train_cmd, "--channels", tr.channels, "backbone widths, e.g. 16,32,32,16");
  opt(train_cmd, "--alpha", tr.alpha, "blend weight of the salient head");
  opt(train_cmd, "--smooth-weight", tr.smooth_weight, "pairwise smoothness weight");
  opt(train_cmd, "--lr", tr.lr, "learning rate");
  opt(train_cmd, "--momentum", tr.momentum, "SGD momentum");
  opt(train_cmd, "--weight-decay", tr.weight_decay, "L2 decay (biases excluded)");
  opt(train_cmd, "--epochs", tr.epochs, "training epochs");
  opt(train_cmd, "--seed", tr.seed, "master seed");
  opt(train_cmd, "--patch-size", tr.patch_size, "square training patch side");
  opt(train_cmd, "--salient-resize", tr.salient_resize, "pre-crop resize (0 = auto)");
  flag(train_cmd, "--rs,!--no-rs", tr.rs, "random sampling baseline (no fixed ratio)");
  opt(train_cmd, "--echo-config", tr.echo, "where to write the effective config");

  ProxyArgs px;
  CLI::App* proxy_cmd = app.add_subcommand("proxy", "generate proxy masks from boxes");
  opt(proxy_cmd, "--checkpoint", px.checkpoint, "trained checkpoint")->required();
  opt(proxy_cmd, "--manifest", px.manifest, "weak manifest with boxes")->required();
  opt(proxy_cmd, "--out", px.out, "proxy manifest to write")->required();
  opt(proxy_cmd, "--alpha", px.alpha, "blend weight of the salient head");
  opt(proxy_cmd, "--drop-thresh", px.drop_thresh, "agreement threshold for the ignore flag");
  opt(proxy_cmd, "--proxy-size", px.proxy_size, "box crops are resized to this side");
  flag(proxy_cmd, "--rle,!--no-rle", px.rle, "store masks inline as RLE");
  opt(proxy_cmd, "--masks-dir", px.masks_dir, "mask directory relative to the manifest");
  opt(proxy_cmd, "--echo-config", px.echo, "where to write the effective config");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  opt(eval_cmd, "--pred", ev.pred, "prediction manifest")->required();
  opt(eval_cmd, "--gt", ev.gt, "ground-truth manifest")->required();
  opt(eval_cmd, "--out", ev.out, "JSON report path (optional)");
  flag(eval_cmd, "--include-ignored,!--no-include-ignored", ev.include_ignored,
       "score ignored predictions too");
  opt(eval_cmd, "--echo-config", ev.echo, "where to write the effective config");

  GradArgs gc;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  opt(grad_cmd, "--seed", gc.seed, "master seed");
  opt(grad_cmd, "--seeds", gc.seeds, "random restarts per target");
  opt(grad_cmd, "--patch", gc.patch, "patch side");
  opt(grad_cmd, "--eps", gc.eps, "central-difference step");
  opt(grad_cmd, "--tol", gc.tol, "max relative error allowed");
  flag(grad_cmd, "--no-composite", gc.no_composite, "skip the backbone+heads target");

  try {
    // Pull --config out before CLI11 sees the args, then inject its values
    // right after the subcommand so explicit flags override them.
    std::string config_path;
    std::vector<std::string> args;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == "--config") {
        if (i + 1 >= raw.size()) throw UsageError("--config needs a file path");
        config_path = raw[++i];
      } else if (raw[i].rfind("--config=", 0) == 0) {
        config_path = raw[i].substr(9);
      } else {
        args.push_back(raw[i]);
      }
    }
    if (!config_path.empty()) {
      if (args.empty() || args[0].empty() || args[0][0] == '-') {
        throw UsageError("--config requires the subcommand to come first");
      }
      const std::vector<std::string> injected = config_to_args(config_path, args[0]);
      args.insert(args.begin() + 1, injected.begin(), injected.end());
    }

    std::reverse(args.begin(), args.end());
    app.parse(args);

    if (gen->parsed()) return run_gen_data(gd);
    if (train_cmd->parsed()) return run_train(tr);
    if (proxy_cmd->parsed()) return run_proxy(px);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (grad_cmd->parsed()) return run_gradcheck(gc);
    throw UsageError("no subcommand");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

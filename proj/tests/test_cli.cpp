#include <fstream>
#include <string>

#include <json.hpp>

#include "boxseg/manifest.hpp"
#include "doctest.h"
#include "helpers.hpp"

using testutil::TempDir;
using testutil::run_cmd;

namespace {

const std::string kTool = BOXSEG_TOOL_PATH;

std::string q(const std::string& s) { return "'" + s + "'"; }

int gen_small(const TempDir& tmp, const std::string& sub, uint64_t seed = 7,
              std::string* out = nullptr) {
  return run_cmd(kTool + " gen-data --out " + q(tmp.str(sub)) +
                     " --count-salient 2 --count-weak 3 --count-val 2" +
                     " --image-size 48 --seed " + std::to_string(seed),
                 out);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("usage problems exit with code 1") {
  std::string out;
  CHECK(run_cmd(kTool, &out) == 1);  // a subcommand is required
  CHECK(run_cmd(kTool + " frobnicate") == 1);
  CHECK(run_cmd(kTool + " gen-data --out /tmp/x --bogus-flag 3") == 1);
  CHECK(run_cmd(kTool + " gen-data") == 1);  // --out is required
  CHECK(run_cmd(kTool + " --help") == 0);
  CHECK(run_cmd(kTool + " gen-data --help") == 0);
  CHECK(run_cmd(kTool + " train --weak a --salient b --checkpoint-out c --mode sideways") == 1);
  CHECK(run_cmd(kTool + " train --weak a --salient b --checkpoint-out c --ratio 9") == 1);
  CHECK(run_cmd(kTool + " train --weak a --salient b --checkpoint-out c --channels 1,2") == 1);
}

TEST_CASE("missing inputs exit with code 2") {
  TempDir tmp("cli_data_err");
  CHECK(run_cmd(kTool + " train --weak " + q(tmp.str("nope.json")) + " --salient " +
                q(tmp.str("nope.json")) + " --checkpoint-out " + q(tmp.str("c.bst"))) == 2);
  CHECK(run_cmd(kTool + " eval --pred " + q(tmp.str("nope.json")) + " --gt " +
                q(tmp.str("nope.json"))) == 2);
  CHECK(run_cmd(kTool + " proxy --checkpoint " + q(tmp.str("no.bst")) + " --manifest " +
                q(tmp.str("no.json")) + " --out " + q(tmp.str("p.json"))) == 2);
}

TEST_CASE("config files merge under explicit flags") {
  TempDir tmp("cli_config");
  std::ofstream(tmp.str("bad.json")) << "{ not json";
  CHECK(run_cmd(kTool + " gen-data --config " + q(tmp.str("bad.json")) + " --out x") == 1);
  std::ofstream(tmp.str("arr.json")) << "[1,2,3]";
  CHECK(run_cmd(kTool + " gen-data --config " + q(tmp.str("arr.json")) + " --out x") == 1);
  std::ofstream(tmp.str("nested.json")) << R"({"seed": {"a": 1}})";
  CHECK(run_cmd(kTool + " gen-data --config " + q(tmp.str("nested.json")) + " --out x") == 1);
  std::ofstream(tmp.str("train.json")) << R"({"command": "train"})";
  CHECK(run_cmd(kTool + " gen-data --config " + q(tmp.str("train.json")) + " --out x") == 1);
  CHECK(run_cmd(kTool + " --config " + q(tmp.str("train.json"))) == 1);  // no subcommand

  // A config value loses to an explicit flag; the echo records the winner.
  std::ofstream(tmp.str("gen.json"))
      << R"({"command": "gen-data", "seed": 3, "count-weak": 1, "image-size": 48})";
  std::string out;
  int rc = run_cmd(kTool + " gen-data --config " + q(tmp.str("gen.json")) + " --out " +
                       q(tmp.str("d")) + " --count-salient 1 --count-val 1 --seed 4",
                   &out);
  CAPTURE(out);
  REQUIRE(rc == 0);
  nlohmann::json echo = read_json(tmp.str("d/run_config.json"));
  CHECK(echo.at("seed").get<uint64_t>() == 4);
  CHECK(echo.at("count-weak").get<int>() == 1);  // config value survived
  CHECK(echo.at("count-salient").get<int>() == 1);
}

TEST_CASE("the effective-config echo reproduces the dataset") {
  TempDir tmp("cli_echo");
  REQUIRE(gen_small(tmp, "a", 7) == 0);

  // Re-feed the recorded config, overriding only the output directory.
  int rc = run_cmd(kTool + " gen-data --config " + q(tmp.str("a/run_config.json")) +
                   " --out " + q(tmp.str("b")));
  REQUIRE(rc == 0);
  for (const char* rel :
       {"salient/manifest.json", "weak/manifest.json", "weak/manifest_eval.json",
        "val/manifest.json", "salient/images/img_00000.pgm", "weak/masks_eval/img_00000_inst_00.pgm"}) {
    CHECK(testutil::read_file(tmp.str("a/") + rel) == testutil::read_file(tmp.str("b/") + rel));
  }
}

TEST_CASE("eval scores a manifest against itself as perfect") {
  TempDir tmp("cli_eval");
  REQUIRE(gen_small(tmp, "d") == 0);
  const std::string val = tmp.str("d/val/manifest.json");
  std::string out;
  int rc = run_cmd(kTool + " eval --pred " + q(val) + " --gt " + q(val) + " --out " +
                       q(tmp.str("report.json")),
                   &out);
  CAPTURE(out);
  REQUIRE(rc == 0);
  CHECK(out.find("mIoU*") != std::string::npos);

  nlohmann::json rep = read_json(tmp.str("report.json"));
  CHECK(rep.at("miou_star").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.at("iou_at").at("75").get<double>() == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(rep.at("ap_at").at("75").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.at("ignored").get<int>() == 0);

  // The weak training manifest has boxes only: not evaluable.
  const std::string weak = tmp.str("d/weak/manifest.json");
  CHECK(run_cmd(kTool + " eval --pred " + q(weak) + " --gt " + q(weak)) == 2);
}

TEST_CASE("gradcheck subcommand reports a pass") {
  std::string out;
  int rc = run_cmd(kTool + " gradcheck --seeds 1 --patch 8 --no-composite", &out);
  CAPTURE(out);
  CHECK(rc == 0);
  CHECK(out.find("gradcheck PASS") != std::string::npos);
}

TEST_CASE("the full pipeline runs end to end") {
  TempDir tmp("cli_pipe");
  REQUIRE(gen_small(tmp, "d", 19) == 0);

  std::string out;
  int rc = run_cmd(kTool + " train --weak " + q(tmp.str("d/weak/manifest.json")) +
                       " --salient " + q(tmp.str("d/salient/manifest.json")) + " --val " +
                       q(tmp.str("d/val/manifest.json")) + " --checkpoint-out " +
                       q(tmp.str("run/model.bst")) + " --log-out " + q(tmp.str("run/log.jsonl")) +
                       " --epochs 1 --patch-size 48 --channels 2,4,4,2 --ratio 2:1 --seed 1",
                   &out);
  CAPTURE(out);
  REQUIRE(rc == 0);
  CHECK(out.find("epoch 0:") != std::string::npos);
  CHECK(out.find("val_miou*=") != std::string::npos);

  // One log line per epoch, parseable JSON.
  std::ifstream log(tmp.str("run/log.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("epoch").get<int>() == lines);
    ++lines;
  }
  CHECK(lines == 1);

  rc = run_cmd(kTool + " proxy --checkpoint " + q(tmp.str("run/model.bst")) + " --manifest " +
                   q(tmp.str("d/weak/manifest.json")) + " --out " + q(tmp.str("run/proxy.json")) +
                   " --proxy-size 48 --drop-thresh 0.0",
               &out);
  CAPTURE(out);
  REQUIRE(rc == 0);
  CHECK(out.find("drop rate: 0.0000") != std::string::npos);

  boxseg::Manifest proxy = boxseg::load_manifest(tmp.str("run/proxy.json"));
  boxseg::Manifest weak = boxseg::load_manifest(tmp.str("d/weak/manifest.json"));
  REQUIRE(proxy.images.size() == weak.images.size());
  for (size_t i = 0; i < proxy.images.size(); ++i) {
    REQUIRE(proxy.images[i].instances.size() == weak.images[i].instances.size());
    for (const auto& inst : proxy.images[i].instances) {
      REQUIRE(inst.mask_file.has_value());
      REQUIRE(inst.agreement.has_value());
      CHECK(*inst.agreement >= 0.0);
      CHECK(inst.ignore.has_value());
      CHECK(!*inst.ignore);  // threshold 0 keeps everything
    }
  }

  // Proxy masks evaluate against the held-back ground truth.
  rc = run_cmd(kTool + " eval --pred " + q(tmp.str("run/proxy.json")) + " --gt " +
                   q(tmp.str("d/weak/manifest_eval.json")) + " --out " +
                   q(tmp.str("run/report.json")),
               &out);
  CAPTURE(out);
  REQUIRE(rc == 0);
  nlohmann::json rep = read_json(tmp.str("run/report.json"));
  CHECK(rep.at("instances").get<int>() >= 3);
  CHECK(rep.at("ignored").get<int>() == 0);
  CHECK(rep.at("miou_star").get<double>() >= 0.0);

  // RLE storage carries the same masks: the evaluation report is identical.
  rc = run_cmd(kTool + " proxy --checkpoint " + q(tmp.str("run/model.bst")) + " --manifest " +
                   q(tmp.str("d/weak/manifest.json")) + " --out " + q(tmp.str("rle/proxy.json")) +
                   " --proxy-size 48 --drop-thresh 0.0 --rle",
               &out);
  REQUIRE(rc == 0);
  boxseg::Manifest rle_m = boxseg::load_manifest(tmp.str("rle/proxy.json"));
  CHECK(rle_m.images[0].instances[0].rle.has_value());
  CHECK(!rle_m.images[0].instances[0].mask_file.has_value());
  rc = run_cmd(kTool + " eval --pred " + q(tmp.str("rle/proxy.json")) + " --gt " +
                   q(tmp.str("d/weak/manifest_eval.json")) + " --out " +
                   q(tmp.str("rle/report.json")),
               &out);
  REQUIRE(rc == 0);
  CHECK(testutil::read_file(tmp.str("run/report.json")) ==
        testutil::read_file(tmp.str("rle/report.json")));
}

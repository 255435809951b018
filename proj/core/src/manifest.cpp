#include "boxseg/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "boxseg/errors.hpp"

namespace boxseg {

namespace {

using json = nlohmann::ordered_json;

json box_to_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

Box box_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw DataError(path + ": box must be [x,y,w,h]");
  return Box{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("load_manifest: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw DataError("load_manifest: " + path + ": " + e.what());
  }
  if (!j.contains("images") || !j["images"].is_array()) {
    throw DataError("load_manifest: " + path + ": missing 'images' array");
  }
  Manifest m;
  for (const json& ji : j["images"]) {
    ManifestImage img;
    img.id = ji.at("id").get<int>();
    img.file = ji.at("file").get<std::string>();
    for (const json& jn : ji.at("instances")) {
      ManifestInstance inst;
      inst.id = jn.at("id").get<int>();
      inst.class_label = jn.at("class").get<std::string>();
      inst.box = box_from_json(jn.at("box"), path);
      if (jn.contains("mask_file")) inst.mask_file = jn["mask_file"].get<std::string>();
      if (jn.contains("rle")) {
        Rle r;
        r.height = jn["rle"].at("size")[0].get<int>();
        r.width = jn["rle"].at("size")[1].get<int>();
        r.counts = jn["rle"].at("counts").get<std::vector<long long>>();
        inst.rle = std::move(r);
      }
      if (jn.contains("ignore")) inst.ignore = jn["ignore"].get<bool>();
      if (jn.contains("agreement")) inst.agreement = jn["agreement"].get<double>();
      img.instances.push_back(std::move(inst));
    }
    m.images.push_back(std::move(img));
  }
  return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
  json j;
  j["images"] = json::array();
  for (const ManifestImage& img : m.images) {
    json ji;
    ji["id"] = img.id;
    ji["file"] = img.file;
    ji["instances"] = json::array();
    for (const ManifestInstance& inst : img.instances) {
      json jn;
      jn["id"] = inst.id;
      jn["class"] = inst.class_label;
      jn["box"] = box_to_json(inst.box);
      if (inst.mask_file) jn["mask_file"] = *inst.mask_file;
      if (inst.rle) {
        jn["rle"] = {{"size", {inst.rle->height, inst.rle->width}}, {"counts", inst.rle->counts}};
      }
      if (inst.ignore) jn["ignore"] = *inst.ignore;
      if (inst.agreement) jn["agreement"] = *inst.agreement;
      ji["instances"].push_back(std::move(jn));
    }
    j["images"].push_back(std::move(ji));
  }
  std::ofstream os(path);
  if (!os) throw DataError("save_manifest: cannot open " + path);
  os << j.dump(2) << "\n";
  if (!os) throw DataError("save_manifest: write failed for " + path);
}

std::string resolve_path(const std::string& manifest_path, const std::string& rel) {
  const std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

}  // namespace boxseg

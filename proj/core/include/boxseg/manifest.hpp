#pragma once

#include <optional>
#include <string>
#include <vector>

#include "boxseg/geometry.hpp"
#include "boxseg/mask_io.hpp"

namespace boxseg {

// One annotated instance. Dataset manifests carry {id, class, box} and
// usually a mask_file; proxy manifests add ignore/agreement and may store
// the mask as RLE instead of a file. Paths are relative to the manifest.
struct ManifestInstance {
  int id = 0;
  std::string class_label;
  Box box;
  std::optional<std::string> mask_file;
  std::optional<Rle> rle;
  std::optional<bool> ignore;
  std::optional<double> agreement;
};

struct ManifestImage {
  int id = 0;
  std::string file;
  std::vector<ManifestInstance> instances;
};

struct Manifest {
  std::vector<ManifestImage> images;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& m);

// Resolve a manifest-relative path against the manifest's directory.
std::string resolve_path(const std::string& manifest_path, const std::string& rel);

}  // namespace boxseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boxseg/geometry.hpp"
#include "boxseg/mask_io.hpp"

namespace boxseg {

// salient: one object per image, mask published in the manifest.
// weak: 1-3 possibly overlapping objects, boxes only in the training
//       manifest; masks go to an eval-only directory + manifest_eval.json.
// val: weak-style scenes with masks published (held-out evaluation split).
enum class Split { salient, weak, val };

struct GenConfig {
  int image_size = 96;
  int count = 10;
  uint64_t seed = 0;
};

struct SceneShape {
  std::string kind;  // ellipse | rectangle | polygon (doubles as class label)
  BinaryMask mask;   // amodal: occluded parts included
  Box box;           // tight bbox of the mask
};

struct Scene {
  GrayImage image;
  std::vector<SceneShape> shapes;
};

// Rotated convex shapes over low-frequency noise. Convexity gives the
// box-tightness prior pixel-by-pixel; rotation keeps a box-filling
// prediction from scoring well at high IoU. Larger shapes are drawn first
// so overlaps occlude them in the image; masks stay amodal.
//
// dominant=true draws frame-filling, near-centered objects — the statistics
// of saliency datasets, and of box crops at prediction time. The salient
// split uses it so the pixel-supervised branch trains on the same object
// scale it is asked to score later.
Scene make_scene(int image_size, int min_shapes, int max_shapes, uint64_t scene_seed,
                 bool dominant = false);

// Writes images/, masks/ (or masks_eval/), manifest.json (and
// manifest_eval.json for the weak split). Returns the training manifest path.
std::string generate_dataset(Split split, const GenConfig& cfg, const std::string& out_dir);

}  // namespace boxseg

#include "boxseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "boxseg/augment.hpp"
#include "boxseg/errors.hpp"
#include "boxseg/manifest.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg {

namespace {

constexpr double kPi = std::numbers::pi;

struct ShapeGeom {
  int kind;  // 0 ellipse, 1 rectangle, 2 polygon
  double cx, cy;
  double a, b;      // half extents / semi-axes
  double theta;
  std::vector<double> px, py;  // polygon vertices (kind 2)
  double intensity, gx, gy;

  double circumradius() const {
    return kind == 1 ? std::hypot(a, b) : std::max(a, b);
  }

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = dx * std::cos(theta) + dy * std::sin(theta);
    const double v = -dx * std::sin(theta) + dy * std::cos(theta);
    switch (kind) {
      case 0:
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
      case 1:
        return std::fabs(u) <= a && std::fabs(v) <= b;
      default: {
        // Convex polygon with CCW vertices: inside iff never to the right of
        // an edge.
        const size_t n = px.size();
        for (size_t i = 0; i < n; ++i) {
          const size_t j = (i + 1) % n;
          const double ex = px[j] - px[i], ey = py[j] - py[i];
          if (ex * (y - py[i]) - ey * (x - px[i]) < 0.0) return false;
        }
        return true;
      }
    }
  }
};

const char* kind_name(int kind) {
  return kind == 0 ? "ellipse" : kind == 1 ? "rectangle" : "polygon";
}

ShapeGeom random_shape(int image_size, Rng& rng, const ShapeGeom* neighbor,
                       bool dominant) {
  ShapeGeom s;
  s.kind = rng.uniform_int(3);
  if (dominant) {
    s.a = rng.uniform(image_size / 4.5, image_size / 3.2);
    s.b = rng.uniform(image_size / 4.5, image_size / 3.2);
  } else {
    s.a = rng.uniform(image_size / 12.0, image_size / 4.8);
    s.b = rng.uniform(image_size / 12.0, image_size / 4.8);
  }
  s.theta = rng.uniform(0.0, kPi);

  // Dominant shapes can outgrow the fixed margin, so they get an exact
  // containment guard instead; it also keeps them near-centered.
  const double margin =
      dominant ? s.circumradius() + 1.0 : image_size * 5.0 / 16.0;
  const double lo = margin, hi = image_size - margin;
  if (neighbor && rng.uniform(0.0, 1.0) < 0.5) {
    // Controlled overlap: land near the previous shape.
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    const double dist =
        rng.uniform(0.4, 0.9) * (neighbor->circumradius() + std::max(s.a, s.b));
    s.cx = std::clamp(neighbor->cx + dist * std::cos(dir), lo, hi);
    s.cy = std::clamp(neighbor->cy + dist * std::sin(dir), lo, hi);
  } else {
    s.cx = rng.uniform(lo, hi);
    s.cy = rng.uniform(lo, hi);
  }

  if (s.kind == 2) {
    const int k = 5 + rng.uniform_int(4);
    for (int i = 0; i < k; ++i) {
      // Jittered regular spacing keeps vertices spread, so the polygon stays
      // fat enough that every bbox row/column catches a pixel center.
      const double ang = 2.0 * kPi * (i + rng.uniform(-0.3, 0.3)) / k;
      const double ex = s.a * std::cos(ang), ey = s.b * std::sin(ang);
      s.px.push_back(s.cx + ex * std::cos(s.theta) - ey * std::sin(s.theta));
      s.py.push_back(s.cy + ex * std::sin(s.theta) + ey * std::cos(s.theta));
    }
  }

  s.intensity = rng.uniform(0.62, 0.95);
  s.gx = rng.uniform(-0.08, 0.08);
  s.gy = rng.uniform(-0.08, 0.08);
  return s;
}

BinaryMask rasterize(const ShapeGeom& s, int size) {
  BinaryMask m(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      if (s.contains(c + 0.5, r + 0.5)) m.at(r, c) = 1;
    }
  }
  return m;
}

}  // namespace

Scene make_scene(int image_size, int min_shapes, int max_shapes, uint64_t scene_seed,
                 bool dominant) {
  SeededRng rng(scene_seed);
  const int n_shapes = min_shapes + rng.uniform_int(max_shapes - min_shapes + 1);

  // Low-frequency background: a coarse noise grid blown up bilinearly.
  const int grid = 6;
  Tensor coarse({1, grid, grid});
  for (int i = 0; i < coarse.numel(); ++i) coarse.at(i) = rng.uniform(0.20, 0.50);
  const Tensor bg = resize_bilinear(coarse, image_size, image_size);

  std::vector<ShapeGeom> geoms;
  for (int k = 0; k < n_shapes; ++k) {
    geoms.push_back(random_shape(image_size, rng, geoms.empty() ? nullptr : &geoms.back(),
                                 dominant));
  }

  Scene scene;
  std::vector<double> canvas(static_cast<size_t>(image_size) * image_size);
  for (int i = 0; i < image_size * image_size; ++i) {
    canvas[static_cast<size_t>(i)] = bg.at(i) + rng.uniform(-0.02, 0.02);
  }

  std::vector<BinaryMask> masks;
  for (const ShapeGeom& geom : geoms) {
    BinaryMask m = rasterize(geom, image_size);
    if (!bbox_of_mask(m)) throw NumericError("make_scene: degenerate shape rasterized empty");
    masks.push_back(std::move(m));
  }

  // Draw big shapes first so smaller ones occlude them in the image.
  std::vector<size_t> order(geoms.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return masks[x].count() > masks[y].count();
  });
  for (size_t oi : order) {
    const ShapeGeom& geom = geoms[oi];
    const BinaryMask& m = masks[oi];
    for (int r = 0; r < image_size; ++r) {
      for (int c = 0; c < image_size; ++c) {
        if (!m.at(r, c)) continue;
        canvas[static_cast<size_t>(r) * image_size + c] =
            geom.intensity + geom.gx * (c - geom.cx) / image_size +
            geom.gy * (r - geom.cy) / image_size;
      }
    }
  }

  scene.image = GrayImage(image_size, image_size);
  for (size_t i = 0; i < canvas.size(); ++i) {
    const double v = std::clamp(canvas[i], 0.0, 1.0);
    scene.image.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  for (size_t i = 0; i < geoms.size(); ++i) {
    scene.shapes.push_back({kind_name(geoms[i].kind), masks[i], *bbox_of_mask(masks[i])});
  }
  return scene;
}

std::string generate_dataset(Split split, const GenConfig& cfg, const std::string& out_dir) {
  if (cfg.count < 1) throw DataError("generate_dataset: count must be >= 1");
  if (cfg.image_size < 48) throw DataError("generate_dataset: image_size must be >= 48");
  namespace fs = std::filesystem;

  const uint64_t stream =
      split == Split::salient ? 0 : split == Split::weak ? 1 : 2;
  const uint64_t split_seed = child_seed(cfg.seed, stream);
  const bool masks_hidden = split == Split::weak;
  const bool dominant = split == Split::salient;
  const int max_shapes = dominant ? 1 : 3;

  const fs::path root(out_dir);
  const fs::path mask_dir = masks_hidden ? "masks_eval" : "masks";
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / mask_dir, ec);
  if (ec) throw DataError("generate_dataset: cannot create directories under " + out_dir);

  Manifest train_m, eval_m;
  int next_instance = 0;
  char buf[64];
  for (int i = 0; i < cfg.count; ++i) {
    const Scene scene = make_scene(cfg.image_size, 1, max_shapes,
                                   child_seed(split_seed, static_cast<uint64_t>(i)),
                                   dominant);
    std::snprintf(buf, sizeof buf, "images/img_%05d.pgm", i);
    const std::string image_rel = buf;
    write_pgm((root / image_rel).string(), scene.image);

    ManifestImage train_img{i, image_rel, {}};
    ManifestImage eval_img{i, image_rel, {}};
    for (const SceneShape& shape : scene.shapes) {
      std::snprintf(buf, sizeof buf, "%s/img_%05d_inst_%02d.pgm", mask_dir.string().c_str(), i,
                    static_cast<int>(train_img.instances.size()));
      const std::string mask_rel = buf;
      write_mask_pgm((root / mask_rel).string(), shape.mask);

      ManifestInstance inst;
      inst.id = next_instance++;
      inst.class_label = shape.kind;
      inst.box = shape.box;
      ManifestInstance masked = inst;
      masked.mask_file = mask_rel;
      eval_img.instances.push_back(masked);
      train_img.instances.push_back(masks_hidden ? inst : masked);
    }
    train_m.images.push_back(std::move(train_img));
    eval_m.images.push_back(std::move(eval_img));
  }

  const std::string main_path = (root / "manifest.json").string();
  save_manifest(main_path, train_m);
  if (masks_hidden) save_manifest((root / "manifest_eval.json").string(), eval_m);
  return main_path;
}

}  // namespace boxseg

#include "boxseg/augment.hpp"

#include <algorithm>
#include <cmath>

#include "boxseg/errors.hpp"

namespace boxseg {

namespace {

constexpr int kRetries = 10;

struct AxisMap {
  int lo, hi;
  double frac;
};

// Half-pixel-center source coordinate for a destination pixel, edge-clamped.
AxisMap axis_map(int dst, int in_size, int out_size) {
  const double s = (dst + 0.5) * (static_cast<double>(in_size) / out_size) - 0.5;
  const double c = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
  const int lo = static_cast<int>(std::floor(c));
  const int hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, c - lo};
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

// Clip a rounded window to [0,img_w) x [0,img_h), keeping at least 1 px.
Box clip_box(int x, int y, int w, int h, int img_w, int img_h) {
  const int x0 = std::clamp(x, 0, img_w - 1);
  const int y0 = std::clamp(y, 0, img_h - 1);
  const int x1 = std::clamp(x + std::max(w, 1), x0 + 1, img_w);
  const int y1 = std::clamp(y + std::max(h, 1), y0 + 1, img_h);
  return Box{x0, y0, x1 - x0, y1 - y0};
}

void check_window(const Box& win, const Tensor& src, const char* who) {
  if (src.ndim() != 3) throw DataError(std::string(who) + ": image must be [C,H,W]");
  const int h = src.shape[1], w = src.shape[2];
  if (win.w <= 0 || win.h <= 0 || win.x < 0 || win.y < 0 || win.x + win.w > w ||
      win.y + win.h > h) {
    throw DataError(std::string(who) + ": window out of bounds");
  }
}

}  // namespace

Tensor to_float_image(const GrayImage& img) {
  Tensor t({1, img.height, img.width});
  for (int i = 0; i < t.numel(); ++i) t.at(i) = img.pixels[static_cast<size_t>(i)] / 255.0;
  return t;
}

Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
  if (src.ndim() != 3) throw DataError("resize_bilinear: image must be [C,H,W]");
  const int C = src.shape[0], h = src.shape[1], w = src.shape[2];
  std::vector<AxisMap> ys(static_cast<size_t>(out_h)), xs(static_cast<size_t>(out_w));
  for (int i = 0; i < out_h; ++i) ys[static_cast<size_t>(i)] = axis_map(i, h, out_h);
  for (int i = 0; i < out_w; ++i) xs[static_cast<size_t>(i)] = axis_map(i, w, out_w);
  Tensor out({C, out_h, out_w});
  for (int c = 0; c < C; ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      const AxisMap& ay = ys[static_cast<size_t>(oy)];
      for (int ox = 0; ox < out_w; ++ox) {
        const AxisMap& ax = xs[static_cast<size_t>(ox)];
        const double top = src.at3(c, ay.lo, ax.lo) +
                           (src.at3(c, ay.lo, ax.hi) - src.at3(c, ay.lo, ax.lo)) * ax.frac;
        const double bot = src.at3(c, ay.hi, ax.lo) +
                           (src.at3(c, ay.hi, ax.hi) - src.at3(c, ay.hi, ax.lo)) * ax.frac;
        out.at3(c, oy, ox) = top + (bot - top) * ay.frac;
      }
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& src, int out_h, int out_w) {
  BinaryMask out(out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const int sy = std::min(static_cast<int>((oy + 0.5) * src.height / out_h), src.height - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      const int sx = std::min(static_cast<int>((ox + 0.5) * src.width / out_w), src.width - 1);
      out.at(oy, ox) = src.at(sy, sx);
    }
  }
  return out;
}

Tensor crop_image(const Tensor& src, const Box& win) {
  check_window(win, src, "crop_image");
  const int C = src.shape[0];
  Tensor out({C, win.h, win.w});
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < win.h; ++y) {
      for (int x = 0; x < win.w; ++x) out.at3(c, y, x) = src.at3(c, win.y + y, win.x + x);
    }
  }
  return out;
}

BinaryMask crop_mask(const BinaryMask& src, const Box& win) {
  if (win.w <= 0 || win.h <= 0 || win.x < 0 || win.y < 0 || win.x + win.w > src.width ||
      win.y + win.h > src.height) {
    throw DataError("crop_mask: window out of bounds");
  }
  BinaryMask out(win.h, win.w);
  for (int y = 0; y < win.h; ++y) {
    for (int x = 0; x < win.w; ++x) out.at(y, x) = src.at(win.y + y, win.x + x);
  }
  return out;
}

Box box_augmentation(const Box& box, int img_w, int img_h, Rng& rng) {
  const double x2 = box.x + rng.uniform(-0.25, 0.25) * box.w;
  const double y2 = box.y + rng.uniform(-0.25, 0.25) * box.h;
  const double w2 = rng.uniform(0.5, 1.5) * box.w;
  const double h2 = rng.uniform(0.5, 1.5) * box.h;
  return clip_box(round_half_up(x2), round_half_up(y2), round_half_up(w2), round_half_up(h2),
                  img_w, img_h);
}

ImagePatch salient_augment(const Tensor& image, const BinaryMask& mask, Rng& rng,
                           int resize_to, int crop_to) {
  if (image.ndim() != 3 || image.shape[1] != mask.height || image.shape[2] != mask.width) {
    throw DataError("salient_augment: image/mask shape mismatch");
  }
  const Tensor big = resize_bilinear(image, resize_to, resize_to);
  const BinaryMask big_mask = resize_nearest(mask, resize_to, resize_to);
  const int span = resize_to - crop_to;

  auto try_window = [&](int ox, int oy) -> std::optional<ImagePatch> {
    const Box win{ox, oy, crop_to, crop_to};
    BinaryMask m = crop_mask(big_mask, win);
    const std::optional<Box> bb = bbox_of_mask(m);
    if (!bb) return std::nullopt;
    ImagePatch p;
    p.image = crop_image(big, win);
    p.mask = std::move(m);
    p.box = *bb;
    return p;
  };

  for (int attempt = 0; attempt <= kRetries; ++attempt) {
    const int ox = span == 0 ? 0 : rng.uniform_int(span + 1);
    const int oy = span == 0 ? 0 : rng.uniform_int(span + 1);
    if (auto p = try_window(ox, oy)) return std::move(*p);
  }
  if (auto p = try_window(span / 2, span / 2)) return std::move(*p);
  throw DataError("salient_augment: mask empty even under center crop");
}

ImagePatch weak_augment(const Tensor& image, const Box& gt_box, Rng& rng, int out_size) {
  check_window(gt_box, image, "weak_augment");
  const int img_h = image.shape[1], img_w = image.shape[2];

  auto map_box = [&](const Box& win) -> std::optional<Box> {
    const double sx = static_cast<double>(out_size) / win.w;
    const double sy = static_cast<double>(out_size) / win.h;
    const int x0 = std::clamp(round_half_up((gt_box.x - win.x) * sx), 0, out_size);
    const int y0 = std::clamp(round_half_up((gt_box.y - win.y) * sy), 0, out_size);
    const int x1 = std::clamp(round_half_up((gt_box.x + gt_box.w - win.x) * sx), 0, out_size);
    const int y1 = std::clamp(round_half_up((gt_box.y + gt_box.h - win.y) * sy), 0, out_size);
    if (x1 - x0 < 1 || y1 - y0 < 1) return std::nullopt;
    return Box{x0, y0, x1 - x0, y1 - y0};
  };

  auto build = [&](const Box& win, const Box& mapped) {
    ImagePatch p;
    p.image = resize_bilinear(crop_image(image, win), out_size, out_size);
    p.box = mapped;
    return p;
  };

  for (int attempt = 0; attempt <= kRetries; ++attempt) {
    const Box win = box_augmentation(gt_box, img_w, img_h, rng);
    if (auto mapped = map_box(win)) return build(win, *mapped);
  }
  const Box win = gt_box;  // unjittered fallback: box spans the whole patch
  const std::optional<Box> mapped = map_box(win);
  return build(win, mapped.value_or(Box{0, 0, out_size, out_size}));
}

ImagePatch proxy_crop(const Tensor& image, const Box& box, int out_size) {
  check_window(box, image, "proxy_crop");
  ImagePatch p;
  p.image = resize_bilinear(crop_image(image, box), out_size, out_size);
  return p;
}

}  // namespace boxseg

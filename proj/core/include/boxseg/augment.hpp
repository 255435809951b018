#pragma once

#include <optional>

#include "boxseg/geometry.hpp"
#include "boxseg/mask_io.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg {

// A training patch: image tensor [C,H,W] with values in [0,1], plus the
// supervision that survived the crop — a mask for salient patches, a box for
// weak patches.
struct ImagePatch {
  Tensor image;
  std::optional<BinaryMask> mask;
  std::optional<Box> box;
};

Tensor to_float_image(const GrayImage& img);  // [1,H,W], /255

// Half-pixel-center bilinear resize, either direction. Mask variant uses
// nearest-neighbor so masks stay binary.
Tensor resize_bilinear(const Tensor& src, int out_h, int out_w);
BinaryMask resize_nearest(const BinaryMask& src, int out_h, int out_w);

Tensor crop_image(const Tensor& src, const Box& window);
BinaryMask crop_mask(const BinaryMask& src, const Box& window);

// Box jitter: x2 = x + u(-1/4,1/4)*w, y2 = y + u(-1/4,1/4)*h,
// w2 = u(1/2,3/2)*w, h2 = u(1/2,3/2)*h, drawn in that order, rounded
// half-up and clipped to the image so at least one pixel survives.
Box box_augmentation(const Box& box, int img_w, int img_h, Rng& rng);

// Resize to `resize_to`, random-crop to `crop_to` (image and mask through
// the identical window). Empty cropped mask -> bounded retries, then a
// center crop. Attached box = bbox of the cropped mask.
ImagePatch salient_augment(const Tensor& image, const BinaryMask& mask, Rng& rng,
                           int resize_to = 320, int crop_to = 288);

// Crop the jittered window, resize to out_size, and map the ORIGINAL box
// through the same transform (this is what lets background into the patch).
// Degenerate mapped box -> bounded retries, then the unjittered window.
ImagePatch weak_augment(const Tensor& image, const Box& gt_box, Rng& rng, int out_size = 288);

// Deterministic exact-box crop resized to out_size, used at proxy time.
ImagePatch proxy_crop(const Tensor& image, const Box& box, int out_size = 320);

}  // namespace boxseg

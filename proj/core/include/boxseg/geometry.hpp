#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace boxseg {

// Axis-aligned pixel box: covers columns [x, x+w) and rows [y, y+h).
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  bool operator==(const Box&) const = default;
};

// Dense binary mask, one byte per pixel in row-major order.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), bits(static_cast<size_t>(h) * w, 0) {}

  uint8_t& at(int r, int c) { return bits[static_cast<size_t>(r) * width + c]; }
  uint8_t at(int r, int c) const { return bits[static_cast<size_t>(r) * width + c]; }
  long long count() const;
};

// Integer-pixel IoU. Two empty boxes (or masks) have IoU 1.0.
double box_iou(const Box& a, const Box& b);
double mask_iou(const BinaryMask& a, const BinaryMask& b);

// Tight bounding box of the set pixels; nullopt for an all-zero mask.
std::optional<Box> bbox_of_mask(const BinaryMask& m);

}  // namespace boxseg

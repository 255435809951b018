#include "boxseg/geometry.hpp"

#include <algorithm>

#include "boxseg/errors.hpp"

namespace boxseg {

long long BinaryMask::count() const {
  long long n = 0;
  for (uint8_t b : bits) n += (b != 0);
  return n;
}

double box_iou(const Box& a, const Box& b) {
  const long long area_a = a.area();
  const long long area_b = b.area();
  if (area_a == 0 && area_b == 0) return 1.0;
  const int ix0 = std::max(a.x, b.x);
  const int iy0 = std::max(a.y, b.y);
  const int ix1 = std::min(a.x + a.w, b.x + b.w);
  const int iy1 = std::min(a.y + a.h, b.y + b.h);
  const long long iw = std::max(0, ix1 - ix0);
  const long long ih = std::max(0, iy1 - iy0);
  const long long inter = iw * ih;
  const long long uni = area_a + area_b - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw DataError("mask_iou: shape mismatch " + std::to_string(a.height) + "x" +
                    std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                    std::to_string(b.width));
  }
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) {
    const bool pa = a.bits[i] != 0;
    const bool pb = b.bits[i] != 0;
    inter += (pa && pb);
    uni += (pa || pb);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<Box> bbox_of_mask(const BinaryMask& m) {
  int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      x0 = std::min(x0, c);
      y0 = std::min(y0, r);
      x1 = std::max(x1, c);
      y1 = std::max(y1, r);
    }
  }
  if (x1 < 0) return std::nullopt;
  return Box{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

}  // namespace boxseg

#include "boxseg/bags.hpp"

#include <algorithm>

#include "boxseg/errors.hpp"

namespace boxseg {

BagSet build_bags(const Box& box, int patch_h, int patch_w) {
  if (box.w <= 0 || box.h <= 0 || box.x < 0 || box.y < 0 ||
      box.x + box.w > patch_w || box.y + box.h > patch_h) {
    throw DataError("build_bags: box (" + std::to_string(box.x) + "," + std::to_string(box.y) +
                    "," + std::to_string(box.w) + "," + std::to_string(box.h) +
                    ") out of bounds for " + std::to_string(patch_h) + "x" +
                    std::to_string(patch_w) + " patch");
  }
  BagSet set;
  set.patch_h = patch_h;
  set.patch_w = patch_w;
  set.source_box = box;

  for (int r = box.y; r < box.y + box.h; ++r) {
    Bag b{BagPolarity::positive, BagAxis::row, r, {}};
    for (int c = box.x; c < box.x + box.w; ++c) b.pixels.emplace_back(r, c);
    set.positives.push_back(std::move(b));
  }
  for (int c = box.x; c < box.x + box.w; ++c) {
    Bag b{BagPolarity::positive, BagAxis::column, c, {}};
    for (int r = box.y; r < box.y + box.h; ++r) b.pixels.emplace_back(r, c);
    set.positives.push_back(std::move(b));
  }
  for (int r = 0; r < patch_h; ++r) {
    if (r >= box.y && r < box.y + box.h) continue;
    Bag b{BagPolarity::negative, BagAxis::row, r, {}};
    for (int c = 0; c < patch_w; ++c) b.pixels.emplace_back(r, c);
    set.negatives.push_back(std::move(b));
  }
  for (int c = 0; c < patch_w; ++c) {
    if (c >= box.x && c < box.x + box.w) continue;
    Bag b{BagPolarity::negative, BagAxis::column, c, {}};
    for (int r = 0; r < patch_h; ++r) b.pixels.emplace_back(r, c);
    set.negatives.push_back(std::move(b));
  }
  return set;
}

std::vector<int> bag_pixel_set(const BagSet& bags) {
  std::vector<int> flat;
  auto take = [&](const std::vector<Bag>& list) {
    for (const Bag& b : list) {
      for (auto [r, c] : b.pixels) flat.push_back(r * bags.patch_w + c);
    }
  };
  take(bags.positives);
  take(bags.negatives);
  std::sort(flat.begin(), flat.end());
  flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
  return flat;
}

}  // namespace boxseg

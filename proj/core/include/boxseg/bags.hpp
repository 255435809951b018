#pragma once

#include <vector>

#include "boxseg/geometry.hpp"

namespace boxseg {

enum class BagPolarity { positive, negative };
enum class BagAxis { row, column };

struct Bag {
  BagPolarity polarity;
  BagAxis axis;
  int index;  // which row or column
  std::vector<std::pair<int, int>> pixels;  // (row, col)
};

// Bags built from the box-tightness prior: an object that tightly fits its
// box must touch every row and column of the box (positive bags), and rows
// or columns lying entirely outside the box contain no object (negative).
struct BagSet {
  std::vector<Bag> positives;
  std::vector<Bag> negatives;
  int patch_h = 0;
  int patch_w = 0;
  Box source_box;
};

// Positive bags: each box row restricted to the box's columns, then each box
// column restricted to the box's rows. Negative bags: each FULL row above or
// below the box, then each FULL column left or right of it. Rows/columns that
// cross the box contribute only their in-box segment (positive); the
// out-of-box remainder is never a negative bag.
BagSet build_bags(const Box& box, int patch_h, int patch_w);

// Sorted unique flat (row-major) indices of all pixels in any bag.
std::vector<int> bag_pixel_set(const BagSet& bags);

}  // namespace boxseg

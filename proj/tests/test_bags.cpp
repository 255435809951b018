#include <algorithm>
#include <set>

#include "boxseg/bags.hpp"
#include "boxseg/errors.hpp"
#include "doctest.h"

using namespace boxseg;

TEST_CASE("bags for an interior box on a 6x6 patch") {
  // Box rows 2-3, cols 1-4.
  BagSet bags = build_bags(Box{1, 2, 4, 2}, 6, 6);
  REQUIRE(bags.positives.size() == 6);  // 2 row bags + 4 column bags
  REQUIRE(bags.negatives.size() == 6);  // rows 0,1,4,5 + cols 0,5

  // Positive row bags come first, restricted to the box columns.
  CHECK(bags.positives[0].axis == BagAxis::row);
  CHECK(bags.positives[0].index == 2);
  CHECK(bags.positives[0].pixels ==
        std::vector<std::pair<int, int>>{{2, 1}, {2, 2}, {2, 3}, {2, 4}});
  CHECK(bags.positives[1].index == 3);

  // Then positive column bags restricted to the box rows.
  CHECK(bags.positives[2].axis == BagAxis::column);
  CHECK(bags.positives[2].index == 1);
  CHECK(bags.positives[2].pixels == std::vector<std::pair<int, int>>{{2, 1}, {3, 1}});
  CHECK(bags.positives[5].index == 4);

  // Negative bags are full rows/columns entirely outside the box.
  std::vector<int> neg_rows, neg_cols;
  for (const Bag& b : bags.negatives) {
    CHECK(b.polarity == BagPolarity::negative);
    if (b.axis == BagAxis::row) {
      neg_rows.push_back(b.index);
      CHECK(b.pixels.size() == 6);  // the whole patch row
    } else {
      neg_cols.push_back(b.index);
      CHECK(b.pixels.size() == 6);
    }
  }
  CHECK(neg_rows == std::vector<int>{0, 1, 4, 5});
  CHECK(neg_cols == std::vector<int>{0, 5});

  for (const Bag& b : bags.positives) CHECK(b.polarity == BagPolarity::positive);
  CHECK(bags.patch_h == 6);
  CHECK(bags.patch_w == 6);
  CHECK(bags.source_box == Box{1, 2, 4, 2});
}

TEST_CASE("a box covering the whole patch leaves no negative bags") {
  BagSet bags = build_bags(Box{0, 0, 5, 7}, 7, 5);
  CHECK(bags.positives.size() == 12);  // h + w
  CHECK(bags.negatives.empty());
}

TEST_CASE("a 1x1 box in a 3x3 patch") {
  BagSet bags = build_bags(Box{0, 0, 1, 1}, 3, 3);
  REQUIRE(bags.positives.size() == 2);
  CHECK(bags.positives[0].pixels == std::vector<std::pair<int, int>>{{0, 0}});
  CHECK(bags.positives[1].pixels == std::vector<std::pair<int, int>>{{0, 0}});
  REQUIRE(bags.negatives.size() == 4);  // rows 1,2 + cols 1,2
  CHECK(bags.negatives[0].index == 1);
  CHECK(bags.negatives[1].index == 2);
}

TEST_CASE("bag unions tile the box interior and its complement rows/cols") {
  Box box{2, 3, 5, 4};
  BagSet bags = build_bags(box, 10, 9);
  CHECK(static_cast<int>(bags.positives.size()) == box.h + box.w);
  CHECK(static_cast<int>(bags.negatives.size()) == (10 - box.h) + (9 - box.w));

  std::set<std::pair<int, int>> pos_union;
  for (const Bag& b : bags.positives)
    for (auto px : b.pixels) {
      CHECK(px.first >= box.y);
      CHECK(px.first < box.y + box.h);
      CHECK(px.second >= box.x);
      CHECK(px.second < box.x + box.w);
      pos_union.insert(px);
    }
  CHECK(pos_union.size() == static_cast<size_t>(box.area()));

  for (const Bag& b : bags.negatives)
    for (auto px : b.pixels) {
      bool outside_rows = px.first < box.y || px.first >= box.y + box.h;
      bool outside_cols = px.second < box.x || px.second >= box.x + box.w;
      CHECK((outside_rows || outside_cols));
    }
}

TEST_CASE("bag_pixel_set is sorted and unique") {
  BagSet bags = build_bags(Box{1, 1, 2, 2}, 4, 4);
  std::vector<int> px = bag_pixel_set(bags);
  CHECK(std::is_sorted(px.begin(), px.end()));
  CHECK(std::adjacent_find(px.begin(), px.end()) == px.end());
  // Box interior + border rows/cols cover the whole 4x4 patch here.
  CHECK(px.size() == 16);
}

TEST_CASE("build_bags rejects out-of-bounds or empty boxes") {
  CHECK_THROWS_AS((void)build_bags(Box{3, 0, 3, 2}, 4, 5), DataError);   // x+w > W
  CHECK_THROWS_AS((void)build_bags(Box{0, 4, 2, 2}, 5, 5), DataError);   // y+h > H
  CHECK_THROWS_AS((void)build_bags(Box{-1, 0, 2, 2}, 5, 5), DataError);  // x < 0
  CHECK_THROWS_AS((void)build_bags(Box{0, 0, 0, 2}, 5, 5), DataError);   // empty
}

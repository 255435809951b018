#include <algorithm>
#include <cmath>
#include <random>

#include "boxseg/bags.hpp"
#include "boxseg/errors.hpp"
#include "boxseg/gradsuite.hpp"
#include "boxseg/graph.hpp"
#include "boxseg/losses.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace boxseg;
using testutil::random_tensor;

namespace {

Tensor constant_map(int h, int w, double v) { return Tensor({h, w}, v); }

// Indicator of the box interior on a h x w patch.
Tensor indicator_map(const Box& box, int h, int w) {
  Tensor t({h, w}, 0.0);
  for (int r = box.y; r < box.y + box.h; ++r)
    for (int c = box.x; c < box.x + box.w; ++c) t.at2(r, c) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("mil_loss on a constant half map equals 8 ln 2") {
  // 4 positive and 4 negative bags, every bag max is 0.5; smooth term of a
  // constant map is zero.
  BagSet bags = build_bags(Box{1, 1, 2, 2}, 4, 4);
  REQUIRE(bags.positives.size() == 4);
  REQUIRE(bags.negatives.size() == 4);
  double loss = mil_loss(constant_map(4, 4, 0.5), bags, LossConfig{});
  CHECK(std::abs(loss - 8.0 * std::log(2.0)) < 1e-9);
  CHECK(loss == doctest::Approx(5.54518).epsilon(1e-5));
}

TEST_CASE("mil_loss on the box indicator is dominated by the smooth penalty") {
  BagSet bags = build_bags(Box{1, 1, 2, 2}, 4, 4);
  Tensor S = indicator_map(Box{1, 1, 2, 2}, 4, 4);
  CHECK(smooth_term(S, bags) == 40.0);
  double loss = mil_loss(S, bags, LossConfig{});
  // Unary terms collapse to clamp residue ~8e-7; 0.05 * 40 = 2.0 remains.
  CHECK(std::abs(loss - 2.0) < 1e-6);
}

TEST_CASE("smooth_term counts ordered in-bounds neighbour pairs") {
  // One bag pixel in the corner: 3 in-bounds neighbours, each differing by
  // 0.5, gives 3 * 0.25.
  BagSet bags;
  bags.patch_h = 2;
  bags.patch_w = 2;
  bags.positives.push_back(Bag{BagPolarity::positive, BagAxis::row, 0, {{0, 0}}});
  Tensor S = Tensor::from_data({2, 2}, {1.0, 0.5, 0.5, 0.5});
  CHECK(smooth_term(S, bags) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("smooth_term is invariant under a constant shift") {
  std::mt19937_64 eng(3);
  BagSet bags = build_bags(Box{2, 1, 3, 4}, 8, 8);
  Tensor S = random_tensor({8, 8}, eng, 0.1, 0.9);
  Tensor shifted = S;
  for (double& v : shifted.data) v += 0.037;
  CHECK(smooth_term(shifted, bags) == doctest::Approx(smooth_term(S, bags)).epsilon(1e-12));
}

TEST_CASE("mil_loss is non-negative and matches its graph node") {
  std::mt19937_64 eng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor S = random_tensor({6, 6}, eng, 0.02, 0.98);
    BagSet bags = build_bags(Box{1, 2, 3, 2}, 6, 6);
    double eager = mil_loss(S, bags, LossConfig{});
    CHECK(eager >= 0.0);

    Graph g;
    NodeId node = mil_loss_node(g, g.input(S), bags, LossConfig{});
    CHECK(g.value(node).shape == std::vector<int>{1});
    CHECK(g.value(node).data[0] == doctest::Approx(eager).epsilon(1e-12));
  }
}

TEST_CASE("mil unary term is monotone in bag maxima") {
  std::mt19937_64 eng(7);
  LossConfig cfg;
  cfg.smooth_weight = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    BagSet bags = build_bags(Box{1, 1, 4, 3}, 8, 8);
    Tensor S = random_tensor({8, 8}, eng, 0.05, 0.9);
    double base = mil_loss(S, bags, cfg);

    // Raising the maximum of a positive bag cannot increase the loss.
    const Bag& pos = bags.positives[trial % bags.positives.size()];
    auto [pr, pc] = *std::max_element(pos.pixels.begin(), pos.pixels.end(),
                                      [&](auto a, auto b) {
                                        return S.at2(a.first, a.second) <
                                               S.at2(b.first, b.second);
                                      });
    Tensor up = S;
    up.at2(pr, pc) += 0.05;
    CHECK(mil_loss(up, bags, cfg) <= base + 1e-12);

    // Raising the maximum of a negative bag cannot decrease it.
    const Bag& neg = bags.negatives[trial % bags.negatives.size()];
    auto [nr, nc] = *std::max_element(neg.pixels.begin(), neg.pixels.end(),
                                      [&](auto a, auto b) {
                                        return S.at2(a.first, a.second) <
                                               S.at2(b.first, b.second);
                                      });
    Tensor worse = S;
    worse.at2(nr, nc) += 0.05;
    CHECK(mil_loss(worse, bags, cfg) >= base - 1e-12);
  }
}

TEST_CASE("clamped bag maxima receive exactly zero gradient") {
  LossConfig cfg;
  cfg.smooth_weight = 0.0;
  BagSet bags = build_bags(Box{1, 1, 2, 2}, 4, 4);

  Graph g;
  Tensor logits({4, 4}, -2.0);
  logits.at2(1, 1) = 50.0;  // sigmoid saturates to 1.0, past the clamp
  NodeId lin = g.input(logits, true);
  NodeId S = g.sigmoid(lin);
  NodeId loss = mil_loss_node(g, S, bags, cfg);
  g.backward(loss);
  const auto* gl = g.grad(lin);
  REQUIRE(gl != nullptr);
  CHECK((*gl)[1 * 4 + 1] == 0.0);

  // Control: an unsaturated argmax does get gradient.
  Graph g2;
  Tensor logits2({4, 4}, -2.0);
  logits2.at2(1, 1) = 1.0;
  NodeId lin2 = g2.input(logits2, true);
  NodeId loss2 = mil_loss_node(g2, g2.sigmoid(lin2), bags, cfg);
  g2.backward(loss2);
  CHECK((*g2.grad(lin2))[1 * 4 + 1] != 0.0);
}

TEST_CASE("pixel_loss blend example equals -ln 0.7") {
  LossConfig cfg;
  cfg.alpha = 0.5;
  BinaryMask M(2, 2);
  for (auto& b : M.bits) b = 1;
  double loss = pixel_loss(M, constant_map(2, 2, 0.8), constant_map(2, 2, 0.6), cfg);
  CHECK(std::abs(loss - (-std::log(0.7))) < 1e-9);
  CHECK(loss == doctest::Approx(0.35667).epsilon(1e-4));
}

TEST_CASE("pixel_loss of a perfect prediction is clamp residue only") {
  LossConfig cfg;
  cfg.alpha = 1.0;
  BinaryMask M(3, 3);
  Tensor S({3, 3}, 0.0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      M.at(r, c) = static_cast<uint8_t>((r + c) % 2);
      S.at2(r, c) = M.at(r, c) ? 1.0 : 0.0;
    }
  CHECK(pixel_loss(M, S, constant_map(3, 3, 0.5), cfg) <= 1e-6);
}

TEST_CASE("pixel_loss node matches the eager value and is a mean") {
  std::mt19937_64 eng(11);
  LossConfig cfg;
  BinaryMask M(4, 4);
  for (int i = 0; i < 16; ++i) M.bits[i] = static_cast<uint8_t>(i % 3 == 0);
  Tensor Sa = random_tensor({4, 4}, eng, 0.05, 0.95);
  Tensor St = random_tensor({4, 4}, eng, 0.05, 0.95);
  double eager = pixel_loss(M, Sa, St, cfg);

  Graph g;
  NodeId node = pixel_loss_node(g, M, g.input(Sa), g.input(St), cfg);
  CHECK(g.value(node).data[0] == doctest::Approx(eager).epsilon(1e-12));

  // Mean semantics: per-pixel BCE of the blend, averaged.
  double acc = 0.0;
  for (int i = 0; i < 16; ++i) {
    double p = cfg.alpha * Sa.data[i] + (1.0 - cfg.alpha) * St.data[i];
    p = std::min(1.0 - cfg.clamp_eps, std::max(cfg.clamp_eps, p));
    acc += M.bits[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  CHECK(eager == doctest::Approx(acc / 16.0).epsilon(1e-12));
}

TEST_CASE("pixel_loss rejects shape mismatches") {
  LossConfig cfg;
  BinaryMask M(2, 2);
  CHECK_THROWS_AS((void)pixel_loss(M, constant_map(2, 3, 0.5), constant_map(2, 3, 0.5), cfg),
                  DataError);
  CHECK_THROWS_AS((void)pixel_loss(M, constant_map(2, 2, 0.5), constant_map(3, 2, 0.5), cfg),
                  DataError);
}

TEST_CASE("total_loss gates the pixel term by sample kind") {
  Graph g;
  NodeId mil = g.input(Tensor::scalar(3.2));
  NodeId pix = g.input(Tensor::scalar(0.5));

  NodeId weak = total_loss_node(g, SampleKind::weak, mil, std::nullopt);
  CHECK(g.value(weak).data[0] == doctest::Approx(3.2));

  NodeId salient = total_loss_node(g, SampleKind::salient, mil, pix);
  CHECK(g.value(salient).data[0] == doctest::Approx(3.7));

  CHECK_THROWS_AS((void)total_loss_node(g, SampleKind::weak, mil, pix), DataError);
  CHECK_THROWS_AS((void)total_loss_node(g, SampleKind::salient, mil, std::nullopt), DataError);
}

TEST_CASE("loss input validation") {
  LossConfig cfg;
  BagSet empty;
  empty.patch_h = 4;
  empty.patch_w = 4;
  CHECK_THROWS_AS((void)mil_loss(constant_map(4, 4, 0.5), empty, cfg), DataError);

  BagSet bags = build_bags(Box{1, 1, 2, 2}, 4, 4);
  CHECK_THROWS_AS((void)mil_loss(constant_map(5, 5, 0.5), bags, cfg), DataError);

  Tensor bad({4, 4}, 0.5);
  bad.data[3] = std::nan("");
  CHECK_THROWS_AS((void)mil_loss(bad, bags, cfg), NumericError);
}

TEST_CASE("loss gradients pass the finite-difference suite on 8x8 patches") {
  GradSuiteConfig cfg;
  cfg.seed = 21;
  cfg.seeds = 20;
  cfg.patch = 8;
  cfg.composite = false;
  GradSuiteReport rep = run_grad_suite(cfg);
  REQUIRE(rep.targets.size() == 2);
  for (const auto& t : rep.targets) {
    INFO(t.name, " max rel err ", t.worst.max_rel_err);
    CHECK(t.worst.max_rel_err < 1e-4);
  }
  CHECK(rep.pass);
}

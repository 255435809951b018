// Hot-path timings: convolution forward/backward, the MIL loss, a full
// optimizer step at training scale, and overlap resolution.

#include <benchmark/benchmark.h>

#include "boxseg/bags.hpp"
#include "boxseg/graph.hpp"
#include "boxseg/losses.hpp"
#include "boxseg/proxymask.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/trainer.hpp"

namespace {

using namespace boxseg;

Tensor random_tensor(std::vector<int> shape, Rng& r, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = r.uniform(lo, hi);
  return t;
}

void bm_conv2d_forward(benchmark::State& state) {
  SeededRng r(7);
  const Tensor x = random_tensor({16, 64, 64}, r);
  const Tensor k = random_tensor({32, 16, 3, 3}, r);
  const Tensor b = random_tensor({32}, r);
  for (auto _ : state) {
    Graph g;
    const NodeId y = g.conv2d(g.input(x), g.input(k), g.input(b), 1, 1);
    benchmark::DoNotOptimize(g.value(y).data.data());
  }
}
BENCHMARK(bm_conv2d_forward);

void bm_conv2d_backward(benchmark::State& state) {
  SeededRng r(7);
  const Tensor x = random_tensor({16, 64, 64}, r);
  const Tensor k = random_tensor({32, 16, 3, 3}, r);
  const Tensor b = random_tensor({32}, r);
  for (auto _ : state) {
    Graph g;
    const NodeId kk = g.input(k, true);
    const NodeId y = g.conv2d(g.input(x, true), kk, g.input(b, true), 1, 1);
    // Reduce to a scalar so backward has a root.
    double s = 0.0;
    for (double v : g.value(y).data) s += v;
    const NodeId sum = g.custom("sum", {y}, Tensor::scalar(s), [](Graph& gr, NodeId self) {
      const double go = gr.grad(self) ? (*gr.grad(self))[0] : 0.0;
      std::vector<double>& gi = gr.grad_buffer(gr.inputs(self)[0]);
      for (double& v : gi) v += go;
    });
    g.backward(sum);
    benchmark::DoNotOptimize(g.grad(kk));
  }
}
BENCHMARK(bm_conv2d_backward);

void bm_mil_loss(benchmark::State& state) {
  SeededRng r(11);
  const int P = 288;
  Tensor score({P, P});
  for (double& v : score.data) v = r.uniform(0.05, 0.95);
  const BagSet bags = build_bags(Box{40, 60, 120, 100}, P, P);
  const LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mil_loss(score, bags, cfg));
  }
}
BENCHMARK(bm_mil_loss);

void bm_train_step(benchmark::State& state) {
  SeededRng r(13);
  const int P = 64;
  TrainConfig cfg;
  cfg.patch_size = P;
  cfg.backbone.channels = {8, 16, 16, 8};
  Model model = make_model(cfg.backbone, 1);
  OptState opt;

  Batch batch;
  for (int i = 0; i < 2; ++i) {
    ImagePatch p;
    p.image = random_tensor({1, P, P}, r, 0.0, 1.0);
    p.box = Box{8, 8, 32, 40};
    batch.weak.push_back(std::move(p));
    batch.weak_tags.push_back("bench weak");
  }
  {
    ImagePatch p;
    p.image = random_tensor({1, P, P}, r, 0.0, 1.0);
    BinaryMask m(P, P);
    for (int row = 16; row < 48; ++row)
      for (int col = 12; col < 40; ++col) m.at(row, col) = 1;
    p.mask = m;
    p.box = Box{12, 16, 28, 32};
    batch.salient.push_back(std::move(p));
    batch.salient_tags.push_back("bench salient");
  }

  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, opt, batch, cfg));
  }
}
BENCHMARK(bm_train_step);

void bm_merge_masks(benchmark::State& state) {
  SeededRng r(17);
  const int H = 96, W = 96;
  std::vector<std::pair<int, BinaryMask>> instances;
  for (int i = 0; i < 6; ++i) {
    BinaryMask m(H, W);
    const int x = r.uniform_int(W / 2), y = r.uniform_int(H / 2);
    const int w = 16 + r.uniform_int(W / 2 - 16), h = 16 + r.uniform_int(H / 2 - 16);
    for (int row = y; row < y + h; ++row)
      for (int col = x; col < x + w; ++col) m.at(row, col) = 1;
    instances.emplace_back(i, std::move(m));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(merge_masks(instances));
  }
}
BENCHMARK(bm_merge_masks);

}  // namespace

BENCHMARK_MAIN();

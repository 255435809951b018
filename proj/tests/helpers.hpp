#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "boxseg/graph.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/tensor.hpp"

namespace testutil {

// Plays back queued draws verbatim; throws when a queue runs dry so a test
// that consumes more randomness than expected fails loudly.
class StubRng final : public boxseg::Rng {
 public:
  std::vector<double> uniforms;
  std::vector<int> ints;

  double uniform(double, double) override {
    if (u_ >= uniforms.size()) throw std::logic_error("StubRng: uniform queue exhausted");
    return uniforms[u_++];
  }
  int uniform_int(int n) override {
    if (i_ >= ints.size()) throw std::logic_error("StubRng: int queue exhausted");
    if (ints[i_] < 0 || ints[i_] >= n)
      throw std::logic_error("StubRng: queued int out of range for caller");
    return ints[i_++];
  }

 private:
  size_t u_ = 0;
  size_t i_ = 0;
};

inline boxseg::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& eng, double lo = -1.0,
                                    double hi = 1.0) {
  boxseg::Tensor t(shape);
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.data) v = d(eng);
  return t;
}

// Scalar node L = sum_i w_i * x_i. A weighted reduction exposes per-element
// gradient errors that a plain sum would let cancel.
inline boxseg::NodeId weighted_sum_node(boxseg::Graph& g, boxseg::NodeId x,
                                        std::vector<double> w) {
  const boxseg::Tensor& xv = g.value(x);
  if (static_cast<int>(w.size()) != xv.numel())
    throw std::logic_error("weighted_sum_node: weight size mismatch");
  double total = 0.0;
  for (int i = 0; i < xv.numel(); ++i) total += w[i] * xv.data[i];
  auto weights = std::make_shared<std::vector<double>>(std::move(w));
  return g.custom("wsum", {x}, boxseg::Tensor::scalar(total),
                  [x, weights](boxseg::Graph& gg, boxseg::NodeId self) {
                    const double go = (*gg.grad(self))[0];
                    if (!gg.requires_grad(x)) return;
                    auto& gx = gg.grad_buffer(x);
                    for (size_t i = 0; i < gx.size(); ++i) gx[i] += go * (*weights)[i];
                  });
}

inline boxseg::NodeId sum_node(boxseg::Graph& g, boxseg::NodeId x) {
  return weighted_sum_node(g, x, std::vector<double>(g.value(x).numel(), 1.0));
}

// Unique scratch directory under the system temp root; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    static std::atomic<unsigned> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / (stem + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& rel = "") const {
    return rel.empty() ? path_.string() : (path_ / rel).string();
  }

 private:
  std::filesystem::path path_;
};

// Runs a command line, captures combined stdout+stderr, returns the exit code.
inline int run_cmd(const std::string& cmd, std::string* out = nullptr) {
  std::string full = cmd + " 2>&1";
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed: " + cmd);
  std::string captured;
  char buf[4096];
  size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) captured.append(buf, n);
  int status = ::pclose(pipe);
  if (out) *out = captured;
  if (status == -1) throw std::runtime_error("pclose failed: " + cmd);
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

inline std::string read_file(const std::string& path) {
  FILE* f = ::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string s;
  char buf[4096];
  size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), f)) > 0) s.append(buf, n);
  ::fclose(f);
  return s;
}

}  // namespace testutil

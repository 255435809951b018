#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace boxseg {

// Deterministic RNG facade. std:: distributions are not pinned across
// implementations, so draws are derived from raw mt19937_64 output here.
class Rng {
 public:
  virtual ~Rng() = default;
  virtual double uniform(double a, double b) = 0;  // [a, b)
  virtual int uniform_int(int n) = 0;              // {0, ..., n-1}, n >= 1
};

class SeededRng final : public Rng {
 public:
  explicit SeededRng(uint64_t seed) : eng_(seed) {}

  double uniform(double a, double b) override {
    const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;  // [0, 1)
    return a + (b - a) * u;
  }

  int uniform_int(int n) override {
    // Unbiased via rejection on the top multiple of n.
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// splitmix64 step: derives statistically independent child seeds from a
// parent seed and an index, so data splits get disjoint streams.
uint64_t child_seed(uint64_t parent, uint64_t index);

// Fisher-Yates using rng.uniform_int, back to front.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
  }
}

}  // namespace boxseg

#include "boxseg/rng.hpp"

namespace boxseg {

uint64_t child_seed(uint64_t parent, uint64_t index) {
  uint64_t z = parent + (index + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace boxseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boxseg/geometry.hpp"

namespace boxseg {

// 8-bit grayscale image, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w, 0) {}

  uint8_t& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
  uint8_t at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
};

// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

// Masks on disk are PGM with foreground 255, background 0.
// Reading treats any nonzero pixel as foreground.
void write_mask_pgm(const std::string& path, const BinaryMask& m);
BinaryMask read_mask_pgm(const std::string& path);

// Uncompressed run-length encoding: column-major scan, counts alternate
// runs of 0s and 1s starting with 0s (first count may be zero).
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<long long> counts;
};

Rle rle_encode(const BinaryMask& m);
BinaryMask rle_decode(const Rle& r);

}  // namespace boxseg

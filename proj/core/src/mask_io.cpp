#include "boxseg/mask_io.hpp"

#include <fstream>

#include "boxseg/errors.hpp"

namespace boxseg {

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_pgm: cannot open " + path);
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw DataError("write_pgm: write failed for " + path);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_pgm: cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw DataError("read_pgm: " + path + " is not binary PGM (magic '" + magic + "')");
  int w = 0, h = 0, maxval = 0;
  // Skip comment lines between header tokens.
  auto next_int = [&](int& v) {
    while (is >> std::ws && is.peek() == '#') {
      std::string line;
      std::getline(is, line);
    }
    is >> v;
  };
  next_int(w);
  next_int(h);
  next_int(maxval);
  if (!is || w <= 0 || h <= 0) throw DataError("read_pgm: bad header in " + path);
  if (maxval != 255) throw DataError("read_pgm: only maxval 255 supported, got " +
                                     std::to_string(maxval) + " in " + path);
  is.get();  // single whitespace before raster
  GrayImage img(h, w);
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw DataError("read_pgm: truncated raster in " + path);
  return img;
}

void write_mask_pgm(const std::string& path, const BinaryMask& m) {
  GrayImage img(m.height, m.width);
  for (size_t i = 0; i < m.bits.size(); ++i) img.pixels[i] = m.bits[i] ? 255 : 0;
  write_pgm(path, img);
}

BinaryMask read_mask_pgm(const std::string& path) {
  const GrayImage img = read_pgm(path);
  BinaryMask m(img.height, img.width);
  for (size_t i = 0; i < img.pixels.size(); ++i) m.bits[i] = img.pixels[i] ? 1 : 0;
  return m;
}

Rle rle_encode(const BinaryMask& m) {
  Rle r;
  r.height = m.height;
  r.width = m.width;
  long long run = 0;
  uint8_t cur = 0;  // counts start with a (possibly empty) run of zeros
  for (int c = 0; c < m.width; ++c) {
    for (int row = 0; row < m.height; ++row) {
      const uint8_t v = m.at(row, c) ? 1 : 0;
      if (v == cur) {
        ++run;
      } else {
        r.counts.push_back(run);
        cur = v;
        run = 1;
      }
    }
  }
  r.counts.push_back(run);
  return r;
}

BinaryMask rle_decode(const Rle& r) {
  BinaryMask m(r.height, r.width);
  const long long total = static_cast<long long>(r.height) * r.width;
  long long pos = 0;
  uint8_t cur = 0;
  for (long long count : r.counts) {
    if (count < 0 || pos + count > total) throw DataError("rle_decode: counts exceed mask size");
    for (long long i = 0; i < count; ++i) {
      const long long idx = pos + i;
      m.at(static_cast<int>(idx % r.height), static_cast<int>(idx / r.height)) = cur;
    }
    pos += count;
    cur = cur ? 0 : 1;
  }
  if (pos != total) throw DataError("rle_decode: counts sum to " + std::to_string(pos) +
                                    ", expected " + std::to_string(total));
  return m;
}

}  // namespace boxseg

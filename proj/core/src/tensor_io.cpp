#include "boxseg/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "boxseg/errors.hpp"

namespace boxseg {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

void put_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw DataError(path + ": truncated file");
  return v;
}

}  // namespace

void write_pfm(const std::string& path, const Tensor& t) {
  if (t.ndim() != 2) throw DataError("write_pfm: tensor must be 2-D, got " + shape_to_string(t.shape));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_pfm: cannot open " + path);
  const int h = t.shape[0], w = t.shape[1];
  os << "Pf\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(w));
  for (int r = h - 1; r >= 0; --r) {
    for (int c = 0; c < w; ++c) row[static_cast<size_t>(c)] = static_cast<float>(t.at2(r, c));
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!os) throw DataError("write_pfm: write failed for " + path);
}

Tensor read_pfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_pfm: cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "Pf") throw DataError("read_pfm: " + path + " is not a grayscale PFM (magic '" + magic + "')");
  int w = 0, h = 0;
  double scale = 0.0;
  is >> w >> h >> scale;
  if (!is || w <= 0 || h <= 0) throw DataError("read_pfm: bad header in " + path);
  if (scale >= 0.0) throw DataError("read_pfm: big-endian PFM not supported: " + path);
  is.get();  // single whitespace after scale
  Tensor t({h, w});
  std::vector<float> row(static_cast<size_t>(w));
  for (int r = h - 1; r >= 0; --r) {
    is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!is) throw DataError("read_pfm: truncated data in " + path);
    for (int c = 0; c < w; ++c) t.at2(r, c) = static_cast<double>(row[static_cast<size_t>(c)]);
  }
  return t;
}

void write_tensor_archive(const std::string& path, const std::map<std::string, Tensor>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_tensor_archive: cannot open " + path);
  os.write("BSTC0001", 8);
  put_u32(os, static_cast<uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<uint32_t>(t.ndim()));
    for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * 8));
  }
  if (!os) throw DataError("write_tensor_archive: write failed for " + path);
}

std::map<std::string, Tensor> read_tensor_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_tensor_archive: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "BSTC0001", 8) != 0) {
    throw DataError("read_tensor_archive: bad magic in " + path);
  }
  const uint32_t count = get_u32(is, path);
  std::map<std::string, Tensor> out;
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = get_u32(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw DataError(path + ": truncated entry name");
    const uint32_t ndim = get_u32(is, path);
    std::vector<int> shape;
    for (uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(get_u32(is, path)));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * 8));
    if (!is) throw DataError(path + ": truncated data for entry '" + name + "'");
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace boxseg

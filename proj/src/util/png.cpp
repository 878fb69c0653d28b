#include "latdream/util/png.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace latdream {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& data) {
  put_u32(out, uint32_t(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = crc32(0, out.data() + start, uInt(out.size() - start));
  put_u32(out, crc);
}

}  // namespace

void write_png(const std::string& path, const uint8_t* rgb, int width,
               int height) {
  // filter byte 0 in front of every scanline
  std::vector<uint8_t> raw(size_t(height) * (size_t(width) * 3 + 1));
  for (int y = 0; y < height; ++y) {
    uint8_t* row = raw.data() + size_t(y) * (size_t(width) * 3 + 1);
    row[0] = 0;
    std::memcpy(row + 1, rgb + size_t(y) * width * 3, size_t(width) * 3);
  }
  uLongf comp_size = compressBound(uLong(raw.size()));
  std::vector<uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), uLong(raw.size()), 6) !=
      Z_OK)
    throw std::runtime_error("write_png: deflate failed");
  comp.resize(comp_size);

  std::vector<uint8_t> out;
  const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.insert(out.end(), sig, sig + 8);
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, uint32_t(width));
  put_u32(ihdr, uint32_t(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", comp);
  put_chunk(out, "IEND", {});

  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_png: cannot open " + path);
  size_t n = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (n != out.size()) throw std::runtime_error("write_png: short write");
}

void write_png(const std::string& path, const ImageU8& img) {
  std::vector<uint8_t> rgb(size_t(img.h) * img.w * 3);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c)
        rgb[(size_t(y) * img.w + x) * 3 + c] =
            img.at(c < img.c ? c : img.c - 1, y, x);
  write_png(path, rgb.data(), img.w, img.h);
}

ImageU8 image_grid(const std::vector<ImageU8>& frames, int cols) {
  if (frames.empty()) throw std::invalid_argument("image_grid: no frames");
  const int fh = frames[0].h, fw = frames[0].w, gap = 2;
  int rows = (int(frames.size()) + cols - 1) / cols;
  ImageU8 grid(3, rows * (fh + gap) - gap, cols * (fw + gap) - gap);
  std::fill(grid.data.begin(), grid.data.end(), uint8_t(30));
  for (size_t i = 0; i < frames.size(); ++i) {
    int gy = int(i) / cols * (fh + gap);
    int gx = int(i) % cols * (fw + gap);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < fh; ++y)
        for (int x = 0; x < fw; ++x)
          grid.at(c, gy + y, gx + x) = frames[i].at(c, y, x);
  }
  return grid;
}

}  // namespace latdream

#pragma once

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "rcac/common.hpp"

namespace rcac {

// Channel-major (C,H,W) 8-bit image.
struct Image {
  int channels = 0, height = 0, width = 0;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int c, int h, int w) : channels(c), height(h), width(w), pixels(size_t(c) * h * w, 0) {}

  uint8_t& at(int c, int y, int x) { return pixels[(size_t(c) * height + y) * width + x]; }
  uint8_t at(int c, int y, int x) const { return pixels[(size_t(c) * height + y) * width + x]; }
};

namespace detail {

inline void png_chunk(std::ostream& os, const char type[4], const std::vector<uint8_t>& payload) {
  auto be32 = [&](uint32_t v) {
    char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
    os.write(b, 4);
  };
  be32(uint32_t(payload.size()));
  os.write(type, 4);
  os.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!payload.empty()) crc = crc32(crc, payload.data(), uInt(payload.size()));
  be32(uint32_t(crc));
}

}  // namespace detail

// Minimal PNG writer for frame and reconstruction dumps. Supports 1-channel
// (grayscale) and 3-channel (RGB) images.
inline void write_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ConfigError("write_png supports 1 or 3 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open " + path);

  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr(13);
  auto be32at = [&](size_t off, uint32_t v) {
    ihdr[off] = uint8_t(v >> 24);
    ihdr[off + 1] = uint8_t(v >> 16);
    ihdr[off + 2] = uint8_t(v >> 8);
    ihdr[off + 3] = uint8_t(v);
  };
  be32at(0, uint32_t(img.width));
  be32at(4, uint32_t(img.height));
  ihdr[8] = 8;                                   // bit depth
  ihdr[9] = img.channels == 3 ? 2 : 0;           // color type
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  detail::png_chunk(os, "IHDR", ihdr);

  // interleave scanlines, each prefixed with filter byte 0
  std::vector<uint8_t> raw;
  raw.reserve(size_t(img.height) * (1 + size_t(img.width) * img.channels));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) raw.push_back(img.at(c, y, x));
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<uint8_t> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw InternalError("zlib compression failed");
  idat.resize(bound);
  detail::png_chunk(os, "IDAT", idat);
  detail::png_chunk(os, "IEND", {});
  if (!os) throw ConfigError("failed writing " + path);
}

}  // namespace rcac

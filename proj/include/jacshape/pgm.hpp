#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jacshape/error.hpp"

namespace jacshape {

/// 8-bit grayscale image, row 0 at the top as stored in the file.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::string pgm_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  fail(ErrorKind::io, "truncated PGM header");
}

}  // namespace detail

/// Reads binary (P5) or ASCII (P2) PGM. Samples are rescaled to 0..255 when
/// maxval differs.
inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open PGM file: " + path);
  const std::string magic = detail::pgm_token(in);
  if (magic != "P2" && magic != "P5") fail(ErrorKind::io, "not a PGM file: " + path);
  GrayImage img;
  img.width = std::stoi(detail::pgm_token(in));
  img.height = std::stoi(detail::pgm_token(in));
  const int maxval = std::stoi(detail::pgm_token(in));
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
    fail(ErrorKind::io, "bad PGM header: " + path);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n);
  auto rescale = [maxval](int v) {
    return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  };
  if (magic == "P2") {
    for (std::size_t k = 0; k < n; ++k) img.pixels[k] = rescale(std::stoi(detail::pgm_token(in)));
  } else {
    in.get();  // single whitespace after maxval
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) fail(ErrorKind::io, "truncated PGM data: " + path);
    for (std::size_t k = 0; k < n; ++k) {
      const int v = bytes == 1 ? raw[k] : (raw[2 * k] << 8) | raw[2 * k + 1];
      img.pixels[k] = rescale(v);
    }
  }
  return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write PGM file: " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

}  // namespace jacshape

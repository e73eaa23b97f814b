#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace worksight {

/// Row-major single-channel image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

using DepthImage = Image<std::uint16_t>;  // millimeters, 0 = no measurement
using MaskImage = Image<std::uint8_t>;    // nonzero = object

// Binary PGM (P5). 16-bit samples are big-endian as the format requires.
DepthImage read_depth_pgm(const std::filesystem::path& path);
MaskImage read_mask_pgm(const std::filesystem::path& path);
void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image);
void write_mask_pgm(const std::filesystem::path& path, const MaskImage& image);

}  // namespace worksight

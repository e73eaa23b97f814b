#include "worksight/image_io.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <cctype>

namespace worksight {

namespace {

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PgmHeader parse_header(const std::string& bytes, const std::filesystem::path& path) {
  PgmHeader h;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    int v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw ValidationError("malformed PGM header in '" + path.string() + "'");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ValidationError("'" + path.string() + "' is not a binary PGM (P5)");
  pos = 2;
  h.width = read_int();
  h.height = read_int();
  h.maxval = read_int();
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw ValidationError("bad PGM dimensions in '" + path.string() + "'");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw ValidationError("malformed PGM header in '" + path.string() + "'");
  h.data_offset = pos + 1;
  return h;
}

}  // namespace

DepthImage read_depth_pgm(const std::filesystem::path& path) {
  const auto bytes = text::read_file(path);
  const auto h = parse_header(bytes, path);
  if (h.maxval < 256) throw ValidationError("depth image '" + path.string() + "' must be 16-bit");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() - h.data_offset < 2 * n) throw ValidationError("truncated PGM '" + path.string() + "'");
  DepthImage img(h.width, h.height);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[h.data_offset + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[h.data_offset + 2 * i + 1]);
    img.pixels[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

MaskImage read_mask_pgm(const std::filesystem::path& path) {
  const auto bytes = text::read_file(path);
  const auto h = parse_header(bytes, path);
  if (h.maxval > 255) throw ValidationError("mask image '" + path.string() + "' must be 8-bit");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() - h.data_offset < n) throw ValidationError("truncated PGM '" + path.string() + "'");
  MaskImage img(h.width, h.height);
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<std::uint8_t>(bytes[h.data_offset + i]);
  return img;
}

void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  out.reserve(out.size() + 2 * image.pixels.size());
  for (auto v : image.pixels) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  text::write_file(path, out);
}

void write_mask_pgm(const std::filesystem::path& path, const MaskImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  text::write_file(path, out);
}

}  // namespace worksight

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace idseq {

/// Interleaved 8-bit image, RGB channel order for 3-channel images.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  bool empty() const { return pixels.empty(); }
  std::size_t size() const { return pixels.size(); }
  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

/// Throws InputError when the file is missing, truncated or not an image.
Image read_image(const std::filesystem::path& path);
Image decode_image(std::span<const std::uint8_t> encoded);
/// Format follows the extension (.png, .jpg, .bmp).
void write_image(const std::filesystem::path& path, const Image& image);

}  // namespace idseq

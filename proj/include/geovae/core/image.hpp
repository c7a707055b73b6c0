#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace geovae {

/// 8-bit raster, channels = 1 (gray) or 3 (RGB), row-major interleaved.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c)
        : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, 0)
    {
    }

    std::uint8_t &at(int y, int x, int c)
    {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const
    {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool empty() const { return pixels.empty(); }
};

/// Write 8-bit gray/RGB PNG (filter 0, stored deflate blocks). Byte-stable.
void write_png(const std::string &path, const Image &img);
std::vector<std::uint8_t> encode_png(const Image &img);

/// Read PNGs produced by write_png (8-bit gray/RGB, non-interlaced).
/// Throws std::runtime_error on files outside that subset.
Image read_png(const std::string &path);
Image decode_png(const std::vector<std::uint8_t> &bytes);

/// Horizontal concatenation of equally sized tiles with a 2px separator.
Image tile_row(const std::vector<Image> &tiles, std::uint8_t gap_value = 255);

} // namespace geovae

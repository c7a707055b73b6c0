#include "geovae/core/image.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace geovae {

namespace {

std::uint32_t crc32(const std::uint8_t *data, std::size_t n, std::uint32_t crc = 0)
{
    static const auto table = [] {
        std::array<std::uint32_t, 256> t {};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i)
        crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

std::uint32_t adler32(const std::uint8_t *data, std::size_t n)
{
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t *p)
{
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8)
        | std::uint32_t(p[3]);
}

void put_chunk(std::vector<std::uint8_t> &out, const char type[4],
               const std::vector<std::uint8_t> &payload)
{
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, crc32(out.data() + start, out.size() - start));
}

// zlib stream around stored (uncompressed) deflate blocks
std::vector<std::uint8_t> zlib_store(const std::vector<std::uint8_t> &raw)
{
    std::vector<std::uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t pos = 0;
    do {
        const std::size_t len = std::min<std::size_t>(raw.size() - pos, 65535);
        const bool final = pos + len == raw.size();
        z.push_back(final ? 1 : 0);
        z.push_back(static_cast<std::uint8_t>(len & 0xff));
        z.push_back(static_cast<std::uint8_t>(len >> 8));
        z.push_back(static_cast<std::uint8_t>(~len & 0xff));
        z.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + len);
        pos += len;
    } while (pos < raw.size());
    put_u32(z, adler32(raw.data(), raw.size()));
    return z;
}

std::vector<std::uint8_t> zlib_unstore(const std::uint8_t *p, std::size_t n)
{
    if (n < 6)
        throw std::runtime_error("png: truncated zlib stream");
    if ((p[0] & 0x0f) != 8)
        throw std::runtime_error("png: unsupported zlib method");
    std::size_t pos = 2;
    std::vector<std::uint8_t> raw;
    for (;;) {
        if (pos + 5 > n)
            throw std::runtime_error("png: truncated deflate block");
        const std::uint8_t header = p[pos];
        if ((header & 0x06) != 0)
            throw std::runtime_error("png: only stored deflate blocks are supported");
        const std::size_t len = p[pos + 1] | (std::size_t(p[pos + 2]) << 8);
        pos += 5;
        if (pos + len > n)
            throw std::runtime_error("png: truncated stored block");
        raw.insert(raw.end(), p + pos, p + pos + len);
        pos += len;
        if (header & 1)
            break;
    }
    return raw;
}

constexpr std::uint8_t png_sig[8] = { 137, 80, 78, 71, 13, 10, 26, 10 };

} // namespace

std::vector<std::uint8_t> encode_png(const Image &img)
{
    if (img.channels != 1 && img.channels != 3)
        throw std::runtime_error("png: channels must be 1 or 3");
    std::vector<std::uint8_t> out(png_sig, png_sig + 8);

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                // bit depth
    ihdr.push_back(img.channels == 3 ? 2 : 0);        // color type
    ihdr.push_back(0);                                // compression
    ihdr.push_back(0);                                // filter
    ihdr.push_back(0);                                // interlace
    put_chunk(out, "IHDR", ihdr);

    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0); // filter type none
        raw.insert(raw.end(), img.pixels.begin() + y * stride,
                   img.pixels.begin() + (y + 1) * stride);
    }
    put_chunk(out, "IDAT", zlib_store(raw));
    put_chunk(out, "IEND", {});
    return out;
}

void write_png(const std::string &path, const Image &img)
{
    const auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("png: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Image decode_png(const std::vector<std::uint8_t> &bytes)
{
    if (bytes.size() < 8 || std::memcmp(bytes.data(), png_sig, 8) != 0)
        throw std::runtime_error("png: bad signature");
    std::size_t pos = 8;
    Image img;
    std::vector<std::uint8_t> idat;
    while (pos + 12 <= bytes.size()) {
        const std::uint32_t len = get_u32(bytes.data() + pos);
        const char *type = reinterpret_cast<const char *>(bytes.data() + pos + 4);
        const std::uint8_t *payload = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13)
                throw std::runtime_error("png: bad IHDR");
            img.width = static_cast<int>(get_u32(payload));
            img.height = static_cast<int>(get_u32(payload + 4));
            const int depth = payload[8], color = payload[9], interlace = payload[12];
            if (depth != 8 || (color != 0 && color != 2) || interlace != 0)
                throw std::runtime_error("png: unsupported format (need 8-bit gray/RGB)");
            img.channels = color == 2 ? 3 : 1;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (img.width <= 0 || img.height <= 0)
        throw std::runtime_error("png: missing IHDR");
    const auto raw = zlib_unstore(idat.data(), idat.size());
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    if (raw.size() != (stride + 1) * img.height)
        throw std::runtime_error("png: size mismatch");
    img.pixels.resize(stride * img.height);
    for (int y = 0; y < img.height; ++y) {
        if (raw[y * (stride + 1)] != 0)
            throw std::runtime_error("png: only filter 0 is supported");
        std::memcpy(img.pixels.data() + y * stride, raw.data() + y * (stride + 1) + 1, stride);
    }
    return img;
}

Image read_png(const std::string &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("png: cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

Image tile_row(const std::vector<Image> &tiles, std::uint8_t gap_value)
{
    if (tiles.empty())
        return {};
    const int h = tiles.front().height;
    const int w = tiles.front().width;
    const int c = tiles.front().channels;
    const int gap = 2;
    Image out(static_cast<int>(tiles.size()) * (w + gap) - gap, h, c);
    std::fill(out.pixels.begin(), out.pixels.end(), gap_value);
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        const Image &tile = tiles[t];
        if (tile.width != w || tile.height != h || tile.channels != c)
            throw std::runtime_error("tile_row: tiles must share shape");
        const int x0 = static_cast<int>(t) * (w + gap);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch)
                    out.at(y, x0 + x, ch) = tile.at(y, x, ch);
    }
    return out;
}

} // namespace geovae

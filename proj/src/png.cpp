// SPDX-License-Identifier: Apache-2.0

#include "fovseg/png.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>

#include "fovseg/common.hpp"

namespace fovseg::png {

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

int channels_for_color_type(int ct) {
    switch (ct) {
        case 0: return 1;  // gray
        case 2: return 3;  // rgb
        case 3: return 1;  // palette indices
        case 4: return 2;  // gray+alpha
        case 6: return 4;  // rgba
        default: return 0;
    }
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& in,
                                       const std::string& path) {
    std::vector<std::uint8_t> out;
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw IoError("png: inflateInit failed: " + path);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    std::uint8_t buf[1 << 16];
    int ret = Z_OK;
    while (ret != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw IoError("png: corrupt compressed data: " + path);
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6) != Z_OK)
        throw IoError("png: compression failed");
    out.resize(bound);
    return out;
}

struct ChunkWriter {
    std::ofstream os;
    explicit ChunkWriter(const std::string& path) : os(path, std::ios::binary | std::ios::trunc) {
        if (!os) throw IoError("cannot open for writing: " + path);
        os.write(reinterpret_cast<const char*>(kSignature), 8);
    }
    void chunk(const char type[4], const std::vector<std::uint8_t>& data) {
        std::vector<std::uint8_t> head;
        put_be32(head, static_cast<std::uint32_t>(data.size()));
        os.write(reinterpret_cast<const char*>(head.data()), 4);
        std::uint32_t crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
        if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
        os.write(type, 4);
        if (!data.empty())
            os.write(reinterpret_cast<const char*>(data.data()),
                     static_cast<std::streamsize>(data.size()));
        std::vector<std::uint8_t> tail;
        put_be32(tail, crc);
        os.write(reinterpret_cast<const char*>(tail.data()), 4);
    }
};

void write_common(const std::string& path, int width, int height, int bit_depth,
                  int color_type, const std::vector<std::uint8_t>& raw_rows,
                  const std::vector<std::array<std::uint8_t, 3>>* palette) {
    FOV_REQUIRE(width >= 1 && height >= 1, "png: empty image");
    ChunkWriter w(path);
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
    ihdr.push_back(static_cast<std::uint8_t>(color_type));
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    w.chunk("IHDR", ihdr);
    if (palette) {
        std::vector<std::uint8_t> plte;
        for (const auto& rgb : *palette) {
            plte.push_back(rgb[0]);
            plte.push_back(rgb[1]);
            plte.push_back(rgb[2]);
        }
        w.chunk("PLTE", plte);
    }
    // Filter type 0 on every row.
    const std::size_t stride = raw_rows.size() / static_cast<std::size_t>(height);
    std::vector<std::uint8_t> filtered;
    filtered.reserve(raw_rows.size() + static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        filtered.push_back(0);
        filtered.insert(filtered.end(), raw_rows.begin() + static_cast<std::ptrdiff_t>(y * stride),
                        raw_rows.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
    }
    w.chunk("IDAT", zlib_deflate(filtered));
    w.chunk("IEND", {});
    if (!w.os) throw IoError("png: write failed: " + path);
}

}  // namespace

Decoded read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::uint8_t sig[8];
    if (!is.read(reinterpret_cast<char*>(sig), 8) || std::memcmp(sig, kSignature, 8) != 0)
        throw IoError("not a PNG file: " + path);

    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    std::vector<std::array<std::uint8_t, 3>> palette;
    bool saw_ihdr = false, saw_iend = false;
    while (!saw_iend) {
        std::uint8_t head[8];
        if (!is.read(reinterpret_cast<char*>(head), 8)) throw IoError("truncated PNG: " + path);
        const std::uint32_t len = be32(head);
        char type[5] = {static_cast<char>(head[4]), static_cast<char>(head[5]),
                        static_cast<char>(head[6]), static_cast<char>(head[7]), 0};
        std::vector<std::uint8_t> data(len);
        if (len && !is.read(reinterpret_cast<char*>(data.data()), len))
            throw IoError("truncated PNG chunk: " + path);
        is.ignore(4);  // CRC
        if (std::strcmp(type, "IHDR") == 0) {
            saw_ihdr = true;
            width = static_cast<int>(be32(&data[0]));
            height = static_cast<int>(be32(&data[4]));
            bit_depth = data[8];
            color_type = data[9];
            if (data[12] != 0) throw IoError("png: interlaced images unsupported: " + path);
            if (bit_depth != 8 && bit_depth != 16)
                throw IoError("png: only 8/16-bit depth supported: " + path);
            if (channels_for_color_type(color_type) == 0)
                throw IoError("png: unsupported color type: " + path);
            if (color_type == 3 && bit_depth != 8)
                throw IoError("png: palette images must be 8-bit: " + path);
        } else if (std::strcmp(type, "PLTE") == 0) {
            for (std::size_t i = 0; i + 2 < data.size(); i += 3)
                palette.push_back({data[i], data[i + 1], data[i + 2]});
        } else if (std::strcmp(type, "IDAT") == 0) {
            idat.insert(idat.end(), data.begin(), data.end());
        } else if (std::strcmp(type, "IEND") == 0) {
            saw_iend = true;
        }
        // Ancillary chunks are skipped.
    }
    if (!saw_ihdr || idat.empty()) throw IoError("png: missing IHDR/IDAT: " + path);

    const int ch = channels_for_color_type(color_type);
    const int bytes_per_sample = bit_depth / 8;
    const std::size_t bpp = static_cast<std::size_t>(ch) * bytes_per_sample;
    const std::size_t stride = static_cast<std::size_t>(width) * bpp;

    std::vector<std::uint8_t> raw = zlib_inflate(idat, path);
    if (raw.size() < static_cast<std::size_t>(height) * (stride + 1))
        throw IoError("png: decompressed size mismatch: " + path);

    // Undo per-row filters in place into `img`.
    std::vector<std::uint8_t> img(static_cast<std::size_t>(height) * stride);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t ft = raw[static_cast<std::size_t>(y) * (stride + 1)];
        const std::uint8_t* src = raw.data() + static_cast<std::size_t>(y) * (stride + 1) + 1;
        std::uint8_t* dst = img.data() + static_cast<std::size_t>(y) * stride;
        const std::uint8_t* prev = y > 0 ? dst - stride : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            const int a = x >= bpp ? dst[x - bpp] : 0;
            const int b = prev ? prev[x] : 0;
            const int c = (prev && x >= bpp) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (ft) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw IoError("png: bad filter type: " + path);
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xFF);
        }
    }

    Decoded out;
    out.width = width;
    out.height = height;
    out.bit_depth = bit_depth;
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    if (color_type == 3) {
        // Expand palette to RGB unless it is a gray ramp used as label storage;
        // callers that want raw indices read `palette_source` + single channel.
        out.palette_source = true;
        out.channels = 1;
        out.samples.resize(pixels);
        for (std::size_t i = 0; i < pixels; ++i) out.samples[i] = img[i];
        (void)palette;
    } else {
        out.channels = ch;
        out.samples.resize(pixels * static_cast<std::size_t>(ch));
        if (bit_depth == 8) {
            for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = img[i];
        } else {
            for (std::size_t i = 0; i < out.samples.size(); ++i)
                out.samples[i] = static_cast<std::uint16_t>((img[2 * i] << 8) | img[2 * i + 1]);
        }
    }
    return out;
}

void write8(const std::string& path, int width, int height, int channels,
            const std::vector<std::uint8_t>& data) {
    FOV_REQUIRE(channels == 1 || channels == 3, "png: write8 supports gray or rgb");
    FOV_REQUIRE(data.size() == static_cast<std::size_t>(width) * height * channels,
                "png: data size mismatch");
    write_common(path, width, height, 8, channels == 1 ? 0 : 2, data, nullptr);
}

void write16_gray(const std::string& path, int width, int height,
                  const std::vector<std::uint16_t>& data) {
    FOV_REQUIRE(data.size() == static_cast<std::size_t>(width) * height,
                "png: data size mismatch");
    std::vector<std::uint8_t> rows(data.size() * 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        rows[2 * i] = static_cast<std::uint8_t>(data[i] >> 8);
        rows[2 * i + 1] = static_cast<std::uint8_t>(data[i] & 0xFF);
    }
    write_common(path, width, height, 16, 0, rows, nullptr);
}

void write_indexed(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& indices,
                   const std::vector<std::array<std::uint8_t, 3>>& palette) {
    FOV_REQUIRE(indices.size() == static_cast<std::size_t>(width) * height,
                "png: data size mismatch");
    FOV_REQUIRE(!palette.empty() && palette.size() <= 256, "png: bad palette size");
    write_common(path, width, height, 8, 3, indices, &palette);
}

}  // namespace fovseg::png

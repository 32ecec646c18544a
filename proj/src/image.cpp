// SPDX-License-Identifier: Apache-2.0

#include "fovseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>

#include "fovseg/png.hpp"

namespace fovseg {

namespace {

constexpr char kTileMagic[8] = {'F', 'O', 'V', 'S', 'E', 'G', 'T', 'R'};
constexpr char kF64Magic[8] = {'F', 'O', 'V', 'S', 'E', 'G', 'F', '8'};
constexpr int kTileSide = 256;

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated file: " + path);
    return b[0] | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::string lower_ext(const std::string& path) {
    const auto pos = path.rfind('.');
    if (pos == std::string::npos) return "";
    std::string e = path.substr(pos + 1);
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

std::uint8_t to_u8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void MemoryImage::read_region(int r0, int c0, int h, int w, double* out) const {
    FOV_REQUIRE(r0 >= 0 && c0 >= 0 && r0 + h <= img_.height && c0 + w <= img_.width,
                "read_region: out of bounds");
    const int C = img_.channels;
    for (int r = 0; r < h; ++r) {
        const double* src =
            img_.values.data() + (static_cast<std::size_t>(r0 + r) * img_.width + c0) * C;
        std::memcpy(out + static_cast<std::size_t>(r) * w * C, src, sizeof(double) * w * C);
    }
}

// ---- tiled raw -----------------------------------------------------------------

struct TiledRawReader::Impl {
    mutable std::mutex mu;  // readers share the stream and the tile cache
    mutable std::ifstream is;
    std::string path;
    int tiles_x = 0;
    // Tiny LRU-of-one cache; patch extraction touches tiles in runs.
    mutable long cached_tile = -1;
    mutable std::vector<std::uint8_t> tile_buf;
};

TiledRawReader::TiledRawReader(const std::string& path) : impl_(new Impl) {
    impl_->is.open(path, std::ios::binary);
    impl_->path = path;
    if (!impl_->is) throw IoError("cannot open: " + path);
    char magic[8];
    if (!impl_->is.read(magic, 8) || std::memcmp(magic, kTileMagic, 8) != 0)
        throw IoError("not a tiled raw file: " + path);
    const auto version = get_u32le(impl_->is, path);
    if (version != 1) throw IoError("unsupported tiled raw version: " + path);
    height_ = static_cast<int>(get_u32le(impl_->is, path));
    width_ = static_cast<int>(get_u32le(impl_->is, path));
    channels_ = static_cast<int>(get_u32le(impl_->is, path));
    const auto tile = get_u32le(impl_->is, path);
    if (tile != kTileSide) throw IoError("unexpected tile size: " + path);
    const auto dtype = get_u32le(impl_->is, path);
    if (dtype != 0) throw IoError("unsupported tiled raw dtype: " + path);
    impl_->tiles_x = (width_ + kTileSide - 1) / kTileSide;
    impl_->tile_buf.resize(static_cast<std::size_t>(kTileSide) * kTileSide * channels_);
}

TiledRawReader::~TiledRawReader() = default;

void TiledRawReader::read_region(int r0, int c0, int h, int w, double* out) const {
    FOV_REQUIRE(r0 >= 0 && c0 >= 0 && r0 + h <= height_ && c0 + w <= width_,
                "read_region: out of bounds");
    const std::lock_guard<std::mutex> lock(impl_->mu);
    const int C = channels_;
    const std::size_t tile_bytes = static_cast<std::size_t>(kTileSide) * kTileSide * C;
    for (int ty = r0 / kTileSide; ty <= (r0 + h - 1) / kTileSide; ++ty) {
        for (int tx = c0 / kTileSide; tx <= (c0 + w - 1) / kTileSide; ++tx) {
            const long tile_index = static_cast<long>(ty) * impl_->tiles_x + tx;
            if (impl_->cached_tile != tile_index) {
                impl_->is.seekg(32 + static_cast<std::streamoff>(tile_index) * tile_bytes);
                if (!impl_->is.read(reinterpret_cast<char*>(impl_->tile_buf.data()),
                                    static_cast<std::streamsize>(tile_bytes)))
                    throw IoError("truncated tiled raw file: " + impl_->path);
                impl_->cached_tile = tile_index;
            }
            const int ry0 = std::max(r0, ty * kTileSide), ry1 = std::min(r0 + h, (ty + 1) * kTileSide);
            const int rx0 = std::max(c0, tx * kTileSide), rx1 = std::min(c0 + w, (tx + 1) * kTileSide);
            for (int r = ry0; r < ry1; ++r) {
                const std::uint8_t* src =
                    impl_->tile_buf.data() +
                    (static_cast<std::size_t>(r - ty * kTileSide) * kTileSide + (rx0 - tx * kTileSide)) * C;
                double* dst = out + (static_cast<std::size_t>(r - r0) * w + (rx0 - c0)) * C;
                for (int i = 0; i < (rx1 - rx0) * C; ++i) dst[i] = src[i] / 255.0;
            }
        }
    }
}

void save_tiled_raw(const std::string& path, const ImageTensor& img) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kTileMagic, 8);
    put_u32le(os, 1);
    put_u32le(os, static_cast<std::uint32_t>(img.height));
    put_u32le(os, static_cast<std::uint32_t>(img.width));
    put_u32le(os, static_cast<std::uint32_t>(img.channels));
    put_u32le(os, kTileSide);
    put_u32le(os, 0);
    const int C = img.channels;
    std::vector<std::uint8_t> tile(static_cast<std::size_t>(kTileSide) * kTileSide * C);
    for (int ty = 0; ty * kTileSide < img.height; ++ty) {
        for (int tx = 0; tx * kTileSide < img.width; ++tx) {
            std::fill(tile.begin(), tile.end(), 0);
            const int h = std::min(kTileSide, img.height - ty * kTileSide);
            const int w = std::min(kTileSide, img.width - tx * kTileSide);
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c)
                    for (int ch = 0; ch < C; ++ch)
                        tile[(static_cast<std::size_t>(r) * kTileSide + c) * C + ch] =
                            to_u8(img.at(ty * kTileSide + r, tx * kTileSide + c, ch));
            os.write(reinterpret_cast<const char*>(tile.data()),
                     static_cast<std::streamsize>(tile.size()));
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

// ---- PNG / PPM ------------------------------------------------------------------

ImageTensor load_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "png") {
        const auto d = png::read(path);
        FOV_CONFIG_REQUIRE(!d.palette_source, "palette PNG is a label map, not an image: " + path);
        const int C = d.channels >= 3 ? 3 : 1;  // drop alpha
        ImageTensor img(d.height, d.width, C);
        const double scale = d.bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
        for (int r = 0; r < d.height; ++r)
            for (int c = 0; c < d.width; ++c)
                for (int ch = 0; ch < C; ++ch)
                    img.at(r, c, ch) =
                        d.samples[(static_cast<std::size_t>(r) * d.width + c) * d.channels + ch] * scale;
        return img;
    }
    if (ext == "ppm" || ext == "pgm") {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot open: " + path);
        std::string tag;
        int w, h, maxv;
        is >> tag >> w >> h >> maxv;
        if (!is || (tag != "P6" && tag != "P5") || maxv != 255)
            throw IoError("unsupported PPM/PGM variant: " + path);
        is.get();  // single whitespace after header
        const int C = tag == "P6" ? 3 : 1;
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * C);
        if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw IoError("truncated PPM/PGM: " + path);
        ImageTensor img(h, w, C);
        for (std::size_t i = 0; i < buf.size(); ++i) img.values[i] = buf[i] / 255.0;
        return img;
    }
    if (ext == "ftr") {
        TiledRawReader reader(path);
        ImageTensor img(reader.height(), reader.width(), reader.channels());
        reader.read_region(0, 0, reader.height(), reader.width(), img.values.data());
        return img;
    }
    throw IoError("unknown image extension: " + path);
}

std::unique_ptr<ImageSource> open_image_source(const std::string& path) {
    if (lower_ext(path) == "ftr") return std::make_unique<TiledRawReader>(path);
    return std::make_unique<MemoryImage>(load_image(path));
}

void save_image_png(const std::string& path, const ImageTensor& img) {
    FOV_REQUIRE(img.channels == 1 || img.channels == 3, "save_image_png: gray or rgb only");
    std::vector<std::uint8_t> data(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) data[i] = to_u8(img.values[i]);
    png::write8(path, img.width, img.height, img.channels, data);
}

void save_image_ppm(const std::string& path, const ImageTensor& img) {
    FOV_REQUIRE(img.channels == 1 || img.channels == 3, "save_image_ppm: gray or rgb only");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << (img.channels == 3 ? "P6" : "P5") << "\n"
       << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> buf(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) buf[i] = to_u8(img.values[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("write failed: " + path);
}

LabelMap load_label_png(const std::string& path) {
    const auto d = png::read(path);
    FOV_CONFIG_REQUIRE(d.bit_depth == 8 && d.channels == 1,
                       "label PNG must be 8-bit single channel: " + path);
    LabelMap labels(d.height, d.width);
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        labels.classes[i] = static_cast<int>(d.samples[i]);
    return labels;
}

void save_label_png(const std::string& path, const LabelMap& labels) {
    std::vector<std::uint8_t> data(labels.classes.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<std::uint8_t>(std::clamp(labels.classes[i], 0, 255));
    png::write8(path, labels.width, labels.height, 1, data);
}

void save_label_png_indexed(const std::string& path, const LabelMap& labels) {
    // Fixed 256-entry palette: distinct hues for small class ids, gray ramp
    // above, black for IGNORE.
    static const std::array<std::uint8_t, 3> base[] = {
        {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
        {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
        {210, 245, 60}, {250, 190, 190}, {0, 128, 128},  {230, 190, 255},
        {170, 110, 40}, {255, 250, 200}, {128, 0, 0},    {170, 255, 195},
        {128, 128, 0},  {255, 215, 180}, {0, 0, 128},    {128, 128, 128},
    };
    std::vector<std::array<std::uint8_t, 3>> palette(256);
    for (int i = 0; i < 256; ++i) {
        if (i < static_cast<int>(std::size(base)))
            palette[i] = base[i];
        else
            palette[i] = {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(i),
                          static_cast<std::uint8_t>(i)};
    }
    palette[kIgnoreLabel] = {0, 0, 0};
    std::vector<std::uint8_t> data(labels.classes.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<std::uint8_t>(std::clamp(labels.classes[i], 0, 255));
    png::write_indexed(path, labels.width, labels.height, data, palette);
}

void save_map_png16(const std::string& path, int height, int width,
                    const std::vector<double>& values01) {
    FOV_REQUIRE(values01.size() == static_cast<std::size_t>(height) * width,
                "save_map_png16: size mismatch");
    std::vector<std::uint16_t> data(values01.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<std::uint16_t>(std::lround(std::clamp(values01[i], 0.0, 1.0) * 65535.0));
    png::write16_gray(path, width, height, data);
}

void save_map_f64(const std::string& path, int height, int width,
                  const std::vector<double>& values) {
    FOV_REQUIRE(values.size() == static_cast<std::size_t>(height) * width,
                "save_map_f64: size mismatch");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kF64Magic, 8);
    put_u32le(os, 1);
    put_u32le(os, static_cast<std::uint32_t>(height));
    put_u32le(os, static_cast<std::uint32_t>(width));
    for (double v : values) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 8);
    }
    if (!os) throw IoError("write failed: " + path);
}

std::vector<double> load_map_f64(const std::string& path, int& height, int& width) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kF64Magic, 8) != 0)
        throw IoError("not a raw map file: " + path);
    if (get_u32le(is, path) != 1) throw IoError("unsupported raw map version: " + path);
    height = static_cast<int>(get_u32le(is, path));
    width = static_cast<int>(get_u32le(is, path));
    std::vector<double> values(static_cast<std::size_t>(height) * width);
    for (auto& v : values) {
        unsigned char b[8];
        if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated raw map: " + path);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&v, &u, 8);
    }
    return values;
}

// ---- resampling -------------------------------------------------------------------

ImageTensor make_lowres(const ImageTensor& image, double rate) {
    FOV_REQUIRE(rate > 0.0 && rate <= 1.0, "make_lowres: rate must be in (0,1]");
    if (rate == 1.0) return image;
    const int h = static_cast<int>(std::lround(image.height * rate));
    const int w = static_cast<int>(std::lround(image.width * rate));
    FOV_REQUIRE(h >= 1 && w >= 1, "make_lowres: rate collapses image to zero size");
    const int C = image.channels;
    ImageTensor out(h, w, C);
    const double sy = static_cast<double>(image.height) / h;
    const double sx = static_cast<double>(image.width) / w;
    for (int oy = 0; oy < h; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        const int iy0 = static_cast<int>(std::floor(y0));
        const int iy1 = std::min(image.height, static_cast<int>(std::ceil(y1)));
        for (int ox = 0; ox < w; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            const int ix0 = static_cast<int>(std::floor(x0));
            const int ix1 = std::min(image.width, static_cast<int>(std::ceil(x1)));
            double wsum = 0.0;
            std::vector<double> acc(C, 0.0);
            for (int iy = iy0; iy < iy1; ++iy) {
                const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
                for (int ix = ix0; ix < ix1; ++ix) {
                    const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
                    const double wgt = wy * wx;
                    wsum += wgt;
                    for (int ch = 0; ch < C; ++ch) acc[ch] += wgt * image.at(iy, ix, ch);
                }
            }
            for (int ch = 0; ch < C; ++ch) out.at(oy, ox, ch) = acc[ch] / wsum;
        }
    }
    return out;
}

ImageTensor resize_bilinear(const ImageTensor& src, int out_h, int out_w) {
    FOV_REQUIRE(out_h >= 1 && out_w >= 1, "resize_bilinear: empty output");
    if (out_h == src.height && out_w == src.width) return src;
    const int C = src.channels;
    ImageTensor out(out_h, out_w, C);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int y1 = std::clamp(y0 + 1, 0, src.height - 1);
        y0 = std::clamp(y0, 0, src.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int x1 = std::clamp(x0 + 1, 0, src.width - 1);
            x0 = std::clamp(x0, 0, src.width - 1);
            for (int ch = 0; ch < C; ++ch) {
                const double v0 = (1 - wx) * src.at(y0, x0, ch) + wx * src.at(y0, x1, ch);
                const double v1 = (1 - wx) * src.at(y1, x0, ch) + wx * src.at(y1, x1, ch);
                out.at(oy, ox, ch) = (1 - wy) * v0 + wy * v1;
            }
        }
    }
    return out;
}

}  // namespace fovseg

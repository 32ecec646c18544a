// SPDX-License-Identifier: Apache-2.0
//
// Image and label storage plus file formats.
//
// Tiled raw format (.ftr), for reading patches without loading whole images:
//   offset  size  field
//   0       8     magic "FOVSEGTR"
//   8       4     u32 version (1)
//   12      4     u32 height
//   16      4     u32 width
//   20      4     u32 channels
//   24      4     u32 tile side (256)
//   28      4     u32 dtype (0 = uint8 scaled to [0,1])
//   32      ...   tiles in row-major tile order; each tile is tile*tile*C
//                 uint8 samples row-major, zero-padded at the bottom/right
//                 edges. All integers little-endian.
//
// Raw float sidecar (.f64): magic "FOVSEGF8", u32 version, u32 height,
// u32 width, then height*width IEEE-754 doubles, little-endian, row-major.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fovseg/common.hpp"

namespace fovseg {

inline constexpr int kIgnoreLabel = 255;

struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;  // HWC row-major, in [0,1]

    ImageTensor() = default;
    ImageTensor(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          values(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int r, int c, int ch) {
        return values[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
    double at(int r, int c, int ch) const {
        return values[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
    std::size_t size() const { return values.size(); }
};

struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<int> classes;  // [0,K) or kIgnoreLabel

    LabelMap() = default;
    LabelMap(int h, int w, int fill = kIgnoreLabel)
        : height(h), width(w), classes(static_cast<std::size_t>(h) * w, fill) {}

    int& at(int r, int c) { return classes[static_cast<std::size_t>(r) * width + c]; }
    int at(int r, int c) const { return classes[static_cast<std::size_t>(r) * width + c]; }
};

// Read-only pixel source; lets the patch extractor work from memory or from
// a tiled file without materializing the full image.
class ImageSource {
public:
    virtual ~ImageSource() = default;
    virtual int height() const = 0;
    virtual int width() const = 0;
    virtual int channels() const = 0;
    // Copy the in-bounds region [r0, r0+h) x [c0, c0+w) into out (h*w*C).
    virtual void read_region(int r0, int c0, int h, int w, double* out) const = 0;
};

class MemoryImage final : public ImageSource {
public:
    explicit MemoryImage(ImageTensor img) : img_(std::move(img)) {}
    int height() const override { return img_.height; }
    int width() const override { return img_.width; }
    int channels() const override { return img_.channels; }
    void read_region(int r0, int c0, int h, int w, double* out) const override;
    const ImageTensor& image() const { return img_; }

private:
    ImageTensor img_;
};

class TiledRawReader final : public ImageSource {
public:
    explicit TiledRawReader(const std::string& path);
    ~TiledRawReader() override;
    int height() const override { return height_; }
    int width() const override { return width_; }
    int channels() const override { return channels_; }
    void read_region(int r0, int c0, int h, int w, double* out) const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int height_ = 0, width_ = 0, channels_ = 0;
};

// ---- file I/O ----------------------------------------------------------------

// Dispatches on extension: .png, .ppm/.pgm, .ftr.
ImageTensor load_image(const std::string& path);
// Opens .ftr files as tiled readers and everything else as MemoryImage.
std::unique_ptr<ImageSource> open_image_source(const std::string& path);

void save_image_png(const std::string& path, const ImageTensor& img);
void save_image_ppm(const std::string& path, const ImageTensor& img);
void save_tiled_raw(const std::string& path, const ImageTensor& img);

// Single-channel PNG with class indices; 255 = IGNORE.
LabelMap load_label_png(const std::string& path);
void save_label_png(const std::string& path, const LabelMap& labels);
// Indexed PNG with a distinct-color palette (for predictions).
void save_label_png_indexed(const std::string& path, const LabelMap& labels);

// 16-bit grayscale map in [0,1] plus raw double sidecar.
void save_map_png16(const std::string& path, int height, int width,
                    const std::vector<double>& values01);
void save_map_f64(const std::string& path, int height, int width,
                  const std::vector<double>& values);
std::vector<double> load_map_f64(const std::string& path, int& height, int& width);

// ---- resampling ----------------------------------------------------------------

// Area-average (box) downsample to round(H*rate) x round(W*rate).
ImageTensor make_lowres(const ImageTensor& image, double rate);

// Bilinear resize with half-pixel centres and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& src, int out_h, int out_w);

}  // namespace fovseg

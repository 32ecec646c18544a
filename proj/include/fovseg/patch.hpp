// SPDX-License-Identifier: Apache-2.0
//
// Patch extraction: for a location in the low-resolution image, produce D
// concentric patches of varying field-of-view resampled to a common S x S
// pixel count, plus the matching ground-truth patch over the smallest FoV.

#pragma once

#include <utility>
#include <vector>

#include "fovseg/image.hpp"

namespace fovseg {

enum class BorderMode { kReflect, kZero };

struct PatchSpec {
    std::vector<int> fovs;     // side lengths in full-resolution pixels, ascending
    int out_size = 0;          // S; 0 means fovs[0]
    double lowres_rate = 1.0;  // rate used to build I_lr
    BorderMode border = BorderMode::kReflect;

    int d() const { return static_cast<int>(fovs.size()); }
    int s() const { return out_size > 0 ? out_size : fovs.front(); }
    void validate() const;
};

struct PatchSet {
    std::pair<int, int> center_lr{0, 0};   // (row, col) in I_lr coordinates
    std::pair<int, int> center_fr{0, 0};   // mapped full-resolution centre
    std::vector<ImageTensor> patches;      // D tensors, each S x S x C
    PatchSpec spec;
};

// Low-res pixel (r,c) -> full-res pixel via ((r+0.5)/rate - 0.5), rounded to
// nearest (ties away from zero) and clamped into the image.
std::pair<int, int> lowres_center_to_full(std::pair<int, int> center_lr, double rate,
                                          int full_h, int full_w);

// Footprint of a FoV square: top-left so the square of side `fov` is centred
// at `center_fr` (even sides bias half a pixel up-left).
inline std::pair<int, int> fov_top_left(std::pair<int, int> center_fr, int fov) {
    return {center_fr.first - fov / 2, center_fr.second - fov / 2};
}

// Materialized footprint with border handling applied; side x side x C.
ImageTensor fetch_padded(const ImageSource& image, int top, int left, int side,
                         BorderMode border);

PatchSet extract_patch_set(const ImageSource& image, std::pair<int, int> center_lr,
                           const PatchSpec& spec);
// Same, anchored at an explicit full-resolution centre (tile inference).
PatchSet extract_patch_set_at(const ImageSource& image, std::pair<int, int> center_fr,
                              const PatchSpec& spec);

// S x S nearest-neighbour label crop over the smallest FoV; out-of-bounds
// pixels get kIgnoreLabel. Row-major ints.
std::vector<int> extract_label_patch(const LabelMap& labels, std::pair<int, int> center_lr,
                                     const PatchSpec& spec);
std::vector<int> extract_label_patch_at(const LabelMap& labels, std::pair<int, int> center_fr,
                                        const PatchSpec& spec);

// Tile layout for full-image inference: smallest-FoV tiles covering the
// image, last row/column clamped inward so tiles stay in bounds.
struct TileGrid {
    std::vector<int> row_tops;  // full-res tile top coordinates
    std::vector<int> col_tops;
    int tile = 0;  // tile side = fovs[0]
    int lowres_h = 0, lowres_w = 0;

    int rows() const { return static_cast<int>(row_tops.size()); }
    int cols() const { return static_cast<int>(col_tops.size()); }
    std::pair<int, int> tile_center_fr(int r, int c) const {
        return {row_tops[r] + tile / 2, col_tops[c] + tile / 2};
    }
    // Low-res pixel whose distribution drives this tile.
    std::pair<int, int> tile_center_lr(int r, int c, double rate) const;
};

TileGrid make_tile_grid(int full_h, int full_w, const PatchSpec& spec, int stride_lr);

// The spec-level view: list of (row, col) low-res centers, row-major.
std::vector<std::pair<int, int>> tile_grid_centers(int full_h, int full_w,
                                                   const PatchSpec& spec, int stride_lr);

}  // namespace fovseg

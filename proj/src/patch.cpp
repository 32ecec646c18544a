// SPDX-License-Identifier: Apache-2.0

#include "fovseg/patch.hpp"

#include <algorithm>
#include <cmath>

namespace fovseg {

void PatchSpec::validate() const {
    FOV_REQUIRE(!fovs.empty(), "PatchSpec: needs at least one FoV");
    for (std::size_t i = 0; i < fovs.size(); ++i) {
        FOV_REQUIRE(fovs[i] >= 1, "PatchSpec: FoV must be positive");
        if (i > 0) FOV_REQUIRE(fovs[i] > fovs[i - 1], "PatchSpec: FoVs must be strictly ascending");
    }
    FOV_REQUIRE(out_size >= 0, "PatchSpec: negative out_size");
    FOV_REQUIRE(lowres_rate > 0.0 && lowres_rate <= 1.0, "PatchSpec: lowres_rate must be in (0,1]");
}

std::pair<int, int> lowres_center_to_full(std::pair<int, int> center_lr, double rate,
                                          int full_h, int full_w) {
    const auto map1 = [rate](int v) {
        return static_cast<int>(std::lround((v + 0.5) / rate - 0.5));
    };
    int r = std::clamp(map1(center_lr.first), 0, full_h - 1);
    int c = std::clamp(map1(center_lr.second), 0, full_w - 1);
    return {r, c};
}

namespace {

// Half-sample symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

ImageTensor fetch_padded(const ImageSource& image, int top, int left, int side,
                         BorderMode border) {
    const int H = image.height(), W = image.width(), C = image.channels();
    ImageTensor out(side, side, C);
    const int c_in0 = std::clamp(left, 0, W);
    const int c_in1 = std::clamp(left + side, 0, W);
    std::vector<double> row_buf(static_cast<std::size_t>(std::max(1, c_in1 - c_in0)) * C);
    std::vector<double> pix(C);
    for (int r = 0; r < side; ++r) {
        const int y = top + r;
        double* dst = out.values.data() + static_cast<std::size_t>(r) * side * C;
        if (border == BorderMode::kZero && (y < 0 || y >= H)) continue;  // row stays zero
        const int ry = border == BorderMode::kReflect ? reflect_index(y, H) : y;
        // Contiguous in-bounds middle run.
        if (c_in1 > c_in0)
            image.read_region(ry, c_in0, 1, c_in1 - c_in0, row_buf.data());
        for (int c = 0; c < side; ++c) {
            const int x = left + c;
            double* px = dst + static_cast<std::size_t>(c) * C;
            if (x >= c_in0 && x < c_in1) {
                std::copy_n(row_buf.data() + static_cast<std::size_t>(x - c_in0) * C, C, px);
            } else if (border == BorderMode::kReflect) {
                image.read_region(ry, reflect_index(x, W), 1, 1, pix.data());
                std::copy_n(pix.data(), C, px);
            }
            // kZero: already zero
        }
    }
    return out;
}

PatchSet extract_patch_set_at(const ImageSource& image, std::pair<int, int> center_fr,
                              const PatchSpec& spec) {
    spec.validate();
    const int S = spec.s();
    PatchSet set;
    set.center_fr = center_fr;
    set.spec = spec;
    set.patches.reserve(spec.fovs.size());
    for (int fov : spec.fovs) {
        const auto [top, left] = fov_top_left(center_fr, fov);
        ImageTensor footprint = fetch_padded(image, top, left, fov, spec.border);
        if (fov == S)
            set.patches.push_back(std::move(footprint));  // 1:1, bitwise crop
        else
            set.patches.push_back(resize_bilinear(footprint, S, S));
    }
    return set;
}

PatchSet extract_patch_set(const ImageSource& image, std::pair<int, int> center_lr,
                           const PatchSpec& spec) {
    spec.validate();
    const auto center_fr =
        lowres_center_to_full(center_lr, spec.lowres_rate, image.height(), image.width());
    PatchSet set = extract_patch_set_at(image, center_fr, spec);
    set.center_lr = center_lr;
    return set;
}

std::vector<int> extract_label_patch_at(const LabelMap& labels, std::pair<int, int> center_fr,
                                        const PatchSpec& spec) {
    spec.validate();
    const int fov0 = spec.fovs.front();
    const int S = spec.s();
    const auto [top, left] = fov_top_left(center_fr, fov0);
    std::vector<int> out(static_cast<std::size_t>(S) * S, kIgnoreLabel);
    for (int r = 0; r < S; ++r) {
        const int y = top + (S == fov0 ? r : static_cast<int>((r + 0.5) * fov0 / S));
        if (y < 0 || y >= labels.height) continue;
        for (int c = 0; c < S; ++c) {
            const int x = left + (S == fov0 ? c : static_cast<int>((c + 0.5) * fov0 / S));
            if (x < 0 || x >= labels.width) continue;
            out[static_cast<std::size_t>(r) * S + c] = labels.at(y, x);
        }
    }
    return out;
}

std::vector<int> extract_label_patch(const LabelMap& labels, std::pair<int, int> center_lr,
                                     const PatchSpec& spec) {
    const auto center_fr =
        lowres_center_to_full(center_lr, spec.lowres_rate, labels.height, labels.width);
    return extract_label_patch_at(labels, center_fr, spec);
}

std::pair<int, int> TileGrid::tile_center_lr(int r, int c, double rate) const {
    const auto [cy, cx] = tile_center_fr(r, c);
    const auto map1 = [rate](int v) {
        return static_cast<int>(std::lround((v + 0.5) * rate - 0.5));
    };
    return {std::clamp(map1(cy), 0, lowres_h - 1), std::clamp(map1(cx), 0, lowres_w - 1)};
}

TileGrid make_tile_grid(int full_h, int full_w, const PatchSpec& spec, int stride_lr) {
    spec.validate();
    FOV_REQUIRE(stride_lr >= 1, "tile_grid: stride must be >= 1");
    FOV_REQUIRE(full_h >= 1 && full_w >= 1, "tile_grid: empty image");
    const int fov0 = spec.fovs.front();
    // Stride is capped at the tile side; larger strides would leave gaps.
    const int stride_fr = std::clamp(
        static_cast<int>(std::lround(stride_lr / spec.lowres_rate)), 1, fov0);

    const auto walk = [fov0, stride_fr](int extent) {
        std::vector<int> tops;
        const int last = std::max(0, extent - fov0);
        for (int t = 0;; t += stride_fr) {
            if (t >= last) {
                tops.push_back(last);  // clamped inward
                break;
            }
            tops.push_back(t);
        }
        return tops;
    };

    TileGrid grid;
    grid.tile = fov0;
    grid.row_tops = walk(full_h);
    grid.col_tops = walk(full_w);
    grid.lowres_h = std::max(1, static_cast<int>(std::lround(full_h * spec.lowres_rate)));
    grid.lowres_w = std::max(1, static_cast<int>(std::lround(full_w * spec.lowres_rate)));
    return grid;
}

std::vector<std::pair<int, int>> tile_grid_centers(int full_h, int full_w,
                                                   const PatchSpec& spec, int stride_lr) {
    const TileGrid grid = make_tile_grid(full_h, full_w, spec, stride_lr);
    std::vector<std::pair<int, int>> centers;
    centers.reserve(static_cast<std::size_t>(grid.rows()) * grid.cols());
    for (int r = 0; r < grid.rows(); ++r)
        for (int c = 0; c < grid.cols(); ++c)
            centers.push_back(grid.tile_center_lr(r, c, spec.lowres_rate));
    return centers;
}

}  // namespace fovseg

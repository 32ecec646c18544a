// SPDX-License-Identifier: Apache-2.0

#include "fovseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fovseg {

namespace {

constexpr double kStripeLo = 0.35;
constexpr double kStripeHi = 0.85;
constexpr double kBarLo = 0.2;
constexpr double kBarHi = 0.8;

// Smooth field in [-1,1]: coarse noise grid, bilinearly upsampled.
std::vector<double> smooth_noise(int h, int w, int cell, RngStream& rng) {
    const int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
    for (auto& v : grid) v = rng.uniform(-1.0, 1.0);
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const double fy = static_cast<double>(y) / cell;
        const int y0 = static_cast<int>(fy);
        const double wy = fy - y0;
        for (int x = 0; x < w; ++x) {
            const double fx = static_cast<double>(x) / cell;
            const int x0 = static_cast<int>(fx);
            const double wx = fx - x0;
            const auto g = [&](int yy, int xx) {
                return grid[static_cast<std::size_t>(yy) * gw + xx];
            };
            out[static_cast<std::size_t>(y) * w + x] =
                (1 - wy) * ((1 - wx) * g(y0, x0) + wx * g(y0, x0 + 1)) +
                wy * ((1 - wx) * g(y0 + 1, x0) + wx * g(y0 + 1, x0 + 1));
        }
    }
    return out;
}

// Blobby two-region mask with the above-threshold fraction forced into a
// balanced band; retries with fresh substreams.
std::vector<double> balanced_mask(int h, int w, int cell, std::uint64_t seed,
                                  const char* tag, std::uint64_t index) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        RngStream rng = RngStream::derive(seed, tag, index * 1000 + attempt);
        auto mask = smooth_noise(h, w, cell, rng);
        std::size_t above = 0;
        for (double v : mask)
            if (v > 0.0) ++above;
        const double frac = static_cast<double>(above) / static_cast<double>(mask.size());
        if (frac >= 0.42 && frac <= 0.58) return mask;
        FOV_CONFIG_REQUIRE(attempt < 256, "synth: could not balance region mask");
    }
}

}  // namespace

SynthImage synth_image(const SynthConfig& cfg, std::uint64_t index) {
    FOV_CONFIG_REQUIRE(cfg.size >= 64, "synth: image size must be at least 64");
    FOV_CONFIG_REQUIRE(cfg.bar_period >= 8 && cfg.bar_period % 2 == 0,
                       "synth: bar period must be an even number >= 8");
    const int N = cfg.size;
    const int half = N / 2;
    const int bar = cfg.bar_period / 2;  // width of one bar

    SynthImage out;
    out.image = ImageTensor(N, N, 1);
    out.labels = LabelMap(N, N, 0);

    // Fine half (left): classes 0/1 on a blobby mask; the class is encoded in
    // the orientation of a period-2 stripe pattern. Any 2x downsample turns
    // both textures into the same uniform gray.
    const auto fine_mask = balanced_mask(N, half, 32, cfg.seed, "synth.fine", index);
    for (int y = 0; y < N; ++y) {
        for (int x = 0; x < half; ++x) {
            const bool a = fine_mask[static_cast<std::size_t>(y) * half + x] > 0.0;
            out.labels.at(y, x) = a ? 0 : 1;
            const bool bright = a ? (x % 2 == 0) : (y % 2 == 0);
            out.image.at(y, x, 0) = bright ? kStripeHi : kStripeLo;
        }
    }

    // Coarse half (right): classes 2/3 on a larger blobby mask; the class is
    // the orientation of wide bars. Inside a bar every small window is
    // uniform, so the orientation (and hence the class) only becomes visible
    // to fields of view on the order of the bar period.
    const auto coarse_mask = balanced_mask(N, N - half, 96, cfg.seed, "synth.coarse", index);
    RngStream rng = RngStream::derive(cfg.seed, "synth.phase", index);
    const int phase_v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.bar_period)));
    const int phase_h = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.bar_period)));
    for (int y = 0; y < N; ++y) {
        for (int x = half; x < N; ++x) {
            const bool a = coarse_mask[static_cast<std::size_t>(y) * (N - half) + (x - half)] > 0.0;
            out.labels.at(y, x) = a ? 2 : 3;
            const bool bright = a ? (((x + phase_v) / bar) % 2 == 0)
                                  : (((y + phase_h) / bar) % 2 == 0);
            out.image.at(y, x, 0) = bright ? kBarHi : kBarLo;
        }
    }
    return out;
}

static void write_dataset_impl(const SynthConfig& cfg, const std::string& out_dir, bool tiled) {
    FOV_CONFIG_REQUIRE(cfg.n_images >= 1, "synth: need at least one image");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    const int n_train = std::max(1, static_cast<int>(std::lround(cfg.n_images * cfg.frac_train)));
    const int n_val = cfg.n_images > n_train
                          ? std::max(cfg.n_images > n_train + 1 ? 1 : 0,
                                     static_cast<int>(std::lround(cfg.n_images * cfg.frac_val)))
                          : 0;

    std::ofstream manifest(fs::path(out_dir) / "manifest.txt", std::ios::trunc);
    if (!manifest) throw IoError("cannot write manifest in " + out_dir);
    manifest << "# fovseg dataset manifest\n";
    manifest << "version 1\n";
    manifest << "classes " << kSynthClasses << "\n";
    for (int i = 0; i < cfg.n_images; ++i) {
        const SynthImage sample = synth_image(cfg, static_cast<std::uint64_t>(i));
        char img_name[32], lab_name[32];
        std::snprintf(img_name, sizeof(img_name), tiled ? "img_%03d.ftr" : "img_%03d.png", i);
        std::snprintf(lab_name, sizeof(lab_name), "lab_%03d.png", i);
        if (tiled)
            save_tiled_raw((fs::path(out_dir) / img_name).string(), sample.image);
        else
            save_image_png((fs::path(out_dir) / img_name).string(), sample.image);
        save_label_png((fs::path(out_dir) / lab_name).string(), sample.labels);
        const char* split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
        manifest << "item " << split << " " << img_name << " " << lab_name << "\n";
    }
    if (!manifest) throw IoError("manifest write failed in " + out_dir);
}

void write_synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    write_dataset_impl(cfg, out_dir, false);
}

void write_synth_dataset_tiled(const SynthConfig& cfg, const std::string& out_dir) {
    write_dataset_impl(cfg, out_dir, true);
}

}  // namespace fovseg

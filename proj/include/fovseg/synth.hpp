// SPDX-License-Identifier: Apache-2.0
//
// Synthetic dataset with two regimes per image. The left half carries two
// classes whose boundary is encoded in a period-2 stripe pattern: visible at
// full resolution, exactly uniform after any downsampling by 2 or more. The
// right half carries two classes encoded in the orientation of wide bars:
// almost every small window lands inside a bar and sees a uniform value, so
// the class only becomes decidable with a field of view on the order of the
// bar period. A single fixed patch configuration therefore cannot segment
// both halves well.

#pragma once

#include <string>

#include "fovseg/image.hpp"
#include "fovseg/rng.hpp"

namespace fovseg {

inline constexpr int kSynthClasses = 4;
// 0: fine texture A (vertical stripes), 1: fine texture B (horizontal),
// 2: coarse vertical bars, 3: coarse horizontal bars.

struct SynthConfig {
    int n_images = 10;
    int size = 256;
    std::uint64_t seed = 1;
    int bar_period = 48;  // full period of the coarse bars
    double frac_train = 0.6;
    double frac_val = 0.2;  // remainder is test
};

struct SynthImage {
    ImageTensor image;  // size x size x 1
    LabelMap labels;
};

// Deterministic per (config.seed, index); every image contains all classes.
SynthImage synth_image(const SynthConfig& cfg, std::uint64_t index);

// Writes images, labels and manifest.txt with a train/val/test split.
void write_synth_dataset(const SynthConfig& cfg, const std::string& out_dir);
// Same split and labels, images stored in the tiled raw format.
void write_synth_dataset_tiled(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace fovseg

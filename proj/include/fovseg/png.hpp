// SPDX-License-Identifier: Apache-2.0
//
// Small PNG codec over zlib. Supports what the pipeline needs: reading
// non-interlaced 8/16-bit grayscale, RGB(A) and palette images; writing 8-bit
// gray/RGB, 8-bit palette and 16-bit gray. Output bytes are deterministic
// (fixed filter, fixed compression level).

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fovseg::png {

struct Decoded {
    int width = 0;
    int height = 0;
    int bit_depth = 8;   // 8 or 16
    int channels = 1;    // after palette expansion: 1, 2, 3 or 4
    bool palette_source = false;
    // Samples row-major, channel-interleaved. 16-bit samples are widened to
    // uint16 host values.
    std::vector<std::uint16_t> samples;
};

Decoded read(const std::string& path);

// 8-bit gray (channels=1) or RGB (channels=3); data row-major interleaved.
void write8(const std::string& path, int width, int height, int channels,
            const std::vector<std::uint8_t>& data);

// 16-bit grayscale.
void write16_gray(const std::string& path, int width, int height,
                  const std::vector<std::uint16_t>& data);

// 8-bit palette image; palette is RGB triples (<= 256 entries).
void write_indexed(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& indices,
                   const std::vector<std::array<std::uint8_t, 3>>& palette);

}  // namespace fovseg::png

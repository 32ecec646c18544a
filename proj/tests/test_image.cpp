// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fovseg/image.hpp"
#include "fovseg/png.hpp"
#include "fovseg/rng.hpp"
#include "oracles.hpp"

using namespace fovseg;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("fovseg_imgtest_" + name)).string();
}

ImageTensor random_image(int h, int w, int c, std::uint64_t seed) {
    ImageTensor img(h, w, c);
    RngStream rng(seed);
    for (auto& v : img.values) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("png gray8 and rgb8 round-trip through 8-bit quantization") {
    for (int c : {1, 3}) {
        const auto img = random_image(13, 9, c, 17);
        const std::string path = tmp_path("rt" + std::to_string(c) + ".png");
        save_image_png(path, img);
        const ImageTensor back = load_image(path);
        REQUIRE(back.height == 13);
        REQUIRE(back.width == 9);
        REQUIRE(back.channels == c);
        for (std::size_t i = 0; i < img.size(); ++i)
            CHECK(std::abs(back.values[i] - img.values[i]) <= 0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("png 16-bit gray map round-trips exactly at 16-bit resolution") {
    std::vector<double> vals(11 * 7);
    RngStream rng(18);
    for (auto& v : vals) v = rng.uniform();
    const std::string path = tmp_path("map16.png");
    save_map_png16(path, 11, 7, vals);
    const auto d = png::read(path);
    REQUIRE(d.bit_depth == 16);
    REQUIRE(d.channels == 1);
    for (std::size_t i = 0; i < vals.size(); ++i)
        CHECK(std::abs(d.samples[i] / 65535.0 - vals[i]) <= 0.5 / 65535.0 + 1e-12);
}

TEST_CASE("label png keeps class ids and the ignore sentinel exactly") {
    LabelMap lab(6, 5);
    RngStream rng(19);
    for (auto& c : lab.classes)
        c = rng.uniform() < 0.2 ? kIgnoreLabel : static_cast<int>(rng.uniform_index(19));
    const std::string path = tmp_path("labels.png");
    save_label_png(path, lab);
    const LabelMap back = load_label_png(path);
    CHECK(back.classes == lab.classes);

    // Indexed predictions keep raw indices too.
    const std::string ipath = tmp_path("labels_indexed.png");
    save_label_png_indexed(ipath, lab);
    const auto d = png::read(ipath);
    CHECK(d.palette_source);
    for (std::size_t i = 0; i < lab.classes.size(); ++i)
        CHECK(static_cast<int>(d.samples[i]) == lab.classes[i]);
}

TEST_CASE("png decoder handles all five row filters") {
    // Hand-build a 4x4 gray PNG whose rows use filters 1..4 over known bytes.
    const int W = 4, H = 4;
    const std::uint8_t raw[H][W] = {
        {10, 20, 30, 40}, {15, 25, 35, 45}, {80, 70, 60, 50}, {5, 255, 0, 128}};
    std::vector<std::uint8_t> filtered;
    const auto paeth = [](int a, int b, int c) {
        const int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
        if (pa <= pb && pa <= pc) return a;
        return pb <= pc ? b : c;
    };
    for (int y = 0; y < H; ++y) {
        const int ft = y + 1;  // filters 1,2,3,4
        filtered.push_back(static_cast<std::uint8_t>(ft));
        for (int x = 0; x < W; ++x) {
            const int here = raw[y][x];
            const int a = x > 0 ? raw[y][x - 1] : 0;
            const int b = y > 0 ? raw[y - 1][x] : 0;
            const int c = (x > 0 && y > 0) ? raw[y - 1][x - 1] : 0;
            int v = 0;
            switch (ft) {
                case 1: v = here - a; break;
                case 2: v = here - b; break;
                case 3: v = here - (a + b) / 2; break;
                case 4: v = here - paeth(a, b, c); break;
            }
            filtered.push_back(static_cast<std::uint8_t>(v & 0xFF));
        }
    }
    uLongf bound = compressBound(static_cast<uLong>(filtered.size()));
    std::vector<std::uint8_t> idat(bound);
    REQUIRE(compress2(idat.data(), &bound, filtered.data(), static_cast<uLong>(filtered.size()),
                      6) == Z_OK);
    idat.resize(bound);

    std::vector<std::uint8_t> file = {137, 80, 78, 71, 13, 10, 26, 10};
    const auto chunk = [&](const char type[4], const std::vector<std::uint8_t>& data) {
        const auto be = [&](std::uint32_t v) {
            file.push_back(static_cast<std::uint8_t>(v >> 24));
            file.push_back(static_cast<std::uint8_t>(v >> 16));
            file.push_back(static_cast<std::uint8_t>(v >> 8));
            file.push_back(static_cast<std::uint8_t>(v));
        };
        be(static_cast<std::uint32_t>(data.size()));
        std::uint32_t crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
        if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
        file.insert(file.end(), type, type + 4);
        file.insert(file.end(), data.begin(), data.end());
        be(crc);
    };
    std::vector<std::uint8_t> ihdr;
    const auto be32v = [&](std::uint32_t v) {
        ihdr.push_back(static_cast<std::uint8_t>(v >> 24));
        ihdr.push_back(static_cast<std::uint8_t>(v >> 16));
        ihdr.push_back(static_cast<std::uint8_t>(v >> 8));
        ihdr.push_back(static_cast<std::uint8_t>(v));
    };
    be32v(W);
    be32v(H);
    ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});
    chunk("IHDR", ihdr);
    chunk("IDAT", idat);
    chunk("IEND", {});

    const std::string path = tmp_path("filters.png");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    os.close();

    const auto d = png::read(path);
    REQUIRE(d.width == W);
    REQUIRE(d.height == H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            CHECK(d.samples[static_cast<std::size_t>(y) * W + x] == raw[y][x]);
}

TEST_CASE("ppm round-trip") {
    const auto img = random_image(8, 6, 3, 20);
    const std::string path = tmp_path("rt.ppm");
    save_image_ppm(path, img);
    const ImageTensor back = load_image(path);
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.values[i] - img.values[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("tiled raw format reads regions identically to the in-memory image") {
    const auto img = random_image(300, 520, 3, 21);  // spans multiple 256-tiles
    const std::string path = tmp_path("tiles.ftr");
    save_tiled_raw(path, img);
    TiledRawReader reader(path);
    REQUIRE(reader.height() == 300);
    REQUIRE(reader.width() == 520);
    MemoryImage mem(img);

    RngStream rng(22);
    for (int it = 0; it < 40; ++it) {
        const int h = 1 + static_cast<int>(rng.uniform_index(64));
        const int w = 1 + static_cast<int>(rng.uniform_index(64));
        const int r0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(300 - h)));
        const int c0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(520 - w)));
        std::vector<double> a(static_cast<std::size_t>(h) * w * 3), b(a.size());
        reader.read_region(r0, c0, h, w, a.data());
        mem.read_region(r0, c0, h, w, b.data());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i] - b[i]) <= 0.5 / 255.0 + 1e-12);
    }
    CHECK_THROWS_AS(reader.read_region(290, 0, 20, 10, nullptr), ContractViolation);
}

TEST_CASE("raw f64 sidecar round-trips bitwise") {
    std::vector<double> vals(9 * 4);
    RngStream rng(23);
    for (auto& v : vals) v = rng.uniform(-1e9, 1e9);
    const std::string path = tmp_path("map.f64");
    save_map_f64(path, 9, 4, vals);
    int h = 0, w = 0;
    const auto back = load_map_f64(path, h, w);
    CHECK(h == 9);
    CHECK(w == 4);
    CHECK(back == vals);
}

TEST_CASE("make_lowres identity and constant cases") {
    const auto img = random_image(10, 12, 2, 24);
    const ImageTensor same = make_lowres(img, 1.0);
    CHECK(same.values == img.values);  // bitwise identity

    ImageTensor flat(2, 2, 1, 0.42);
    const ImageTensor one = make_lowres(flat, 0.5);
    REQUIRE(one.height == 1);
    REQUIRE(one.width == 1);
    CHECK(one.values[0] == doctest::Approx(0.42).epsilon(1e-15));
}

TEST_CASE("make_lowres matches the block-mean oracle on integer factors") {
    RngStream rng(25);
    int cases = 0;
    while (cases < 210) {
        const int factor = 2 + static_cast<int>(rng.uniform_index(3));
        const int h = factor * (1 + static_cast<int>(rng.uniform_index(6)));
        const int w = factor * (1 + static_cast<int>(rng.uniform_index(6)));
        const int c = 1 + static_cast<int>(rng.uniform_index(3));
        const auto img = random_image(h, w, c, 1000 + cases);
        const ImageTensor down = make_lowres(img, 1.0 / factor);
        const ImageTensor expect = oracle::block_mean(img, factor);
        REQUIRE(down.height == expect.height);
        REQUIRE(down.width == expect.width);
        for (std::size_t i = 0; i < expect.values.size(); ++i)
            CHECK(down.values[i] == doctest::Approx(expect.values[i]).epsilon(1e-9));
        ++cases;
    }
}

TEST_CASE("make_lowres contract violations") {
    const auto img = random_image(4, 4, 1, 26);
    CHECK_THROWS_AS(make_lowres(img, 0.0), ContractViolation);
    CHECK_THROWS_AS(make_lowres(img, 1.5), ContractViolation);
    CHECK_THROWS_AS(make_lowres(img, 0.01), ContractViolation);  // collapses to zero size
}

TEST_CASE("resize_bilinear is exact on linear ramps") {
    ImageTensor ramp(8, 8, 1);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) ramp.at(y, x, 0) = 0.1 * y + 0.05 * x;
    const ImageTensor up = resize_bilinear(ramp, 16, 16);
    // Interior of a bilinear upsample of a linear function reproduces it.
    for (int y = 2; y < 14; ++y)
        for (int x = 2; x < 14; ++x) {
            const double sy = (y + 0.5) / 2.0 - 0.5, sx = (x + 0.5) / 2.0 - 0.5;
            CHECK(up.at(y, x, 0) == doctest::Approx(0.1 * sy + 0.05 * sx).epsilon(1e-12));
        }
}

// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fovseg/eval.hpp"
#include "support.hpp"

using namespace fovseg;
using namespace testsup;

namespace {

PatchDistribution uniform_dist(int h, int w, int d) {
    PatchDistribution dist;
    dist.h = h;
    dist.w = w;
    dist.d = d;
    dist.probs.assign(static_cast<std::size_t>(h) * w * d, 1.0 / d);
    return dist;
}

PatchDistribution onehot_dist(int h, int w, int d, int hot) {
    PatchDistribution dist;
    dist.h = h;
    dist.w = w;
    dist.d = d;
    dist.probs.assign(static_cast<std::size_t>(h) * w * d, 0.0);
    for (int i = 0; i < h * w; ++i) dist.probs[static_cast<std::size_t>(i) * d + hot] = 1.0;
    return dist;
}

}  // namespace

TEST_CASE("foveation map endpoints and the uniform DeepGlobe value") {
    const std::vector<int> fovs{500, 1000, 1500, 2000, 2500};
    const auto zero_map = foveation_map(onehot_dist(3, 4, 5, 0), fovs);
    for (double v : zero_map.values) CHECK(v == 0.0);
    const auto one_map = foveation_map(onehot_dist(3, 4, 5, 4), fovs);
    for (double v : one_map.values) CHECK(v == 1.0);
    const auto mid = foveation_map(uniform_dist(3, 4, 5), fovs);
    for (double v : mid.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    // Degenerate single-FoV range: all zeros.
    const auto degenerate = foveation_map(uniform_dist(2, 2, 1), {700});
    for (double v : degenerate.values) CHECK(v == 0.0);
}

TEST_CASE("foveation map range invariant for random distributions") {
    RngStream rng(7);
    for (int it = 0; it < 50; ++it) {
        PatchDistribution dist;
        dist.h = 4;
        dist.w = 5;
        dist.d = 3;
        dist.probs.resize(60);
        for (int i = 0; i < 20; ++i) {
            double s = 0;
            for (int d = 0; d < 3; ++d)
                s += (dist.probs[static_cast<std::size_t>(i) * 3 + d] = rng.uniform());
            for (int d = 0; d < 3; ++d) dist.probs[static_cast<std::size_t>(i) * 3 + d] /= s;
        }
        const auto map = foveation_map(dist, {16, 32, 64});
        for (double v : map.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("gold standard map weighting") {
    const std::vector<int> fovs{100, 200, 300, 400, 500};
    // Single winner: value equals that baseline's normalized FoV.
    std::vector<std::vector<double>> miou(5, std::vector<double>(1, 0.0));
    miou[3][0] = 1.0;
    const auto win = gold_standard_map(miou, fovs, 1, 1);
    CHECK(win.values[0] == doctest::Approx((400.0 - 100.0) / 400.0).epsilon(1e-12));

    // Equal scores over a symmetric FoV set: 0.5.
    std::vector<std::vector<double>> equal(5, std::vector<double>(6, 0.4));
    const auto mid = gold_standard_map(equal, fovs, 2, 3);
    for (double v : mid.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    // All-zero location falls back to uniform weights (also 0.5 here).
    std::vector<std::vector<double>> zeros(5, std::vector<double>(1, 0.0));
    const auto fallback = gold_standard_map(zeros, fovs, 1, 1);
    CHECK(fallback.values[0] == doctest::Approx(0.5).epsilon(1e-12));

    // Random case against a direct recomputation.
    RngStream rng(11);
    std::vector<std::vector<double>> rnd(5, std::vector<double>(12));
    for (auto& m : rnd)
        for (auto& v : m) v = rng.uniform();
    const auto map = gold_standard_map(rnd, fovs, 3, 4);
    for (int i = 0; i < 12; ++i) {
        double total = 0, acc = 0;
        for (int d = 0; d < 5; ++d) total += rnd[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
        for (int d = 0; d < 5; ++d)
            acc += rnd[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)] / total * fovs[static_cast<std::size_t>(d)];
        const double expect = (acc - 100.0) / 400.0;
        CHECK(std::abs(map.values[static_cast<std::size_t>(i)] - expect) < 1e-9);
    }

    // Winner-take-all variant.
    const auto am = gold_standard_argmax_map(rnd, fovs, 3, 4);
    for (int i = 0; i < 12; ++i) {
        int best = 0;
        for (int d = 1; d < 5; ++d)
            if (rnd[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)] >
                rnd[static_cast<std::size_t>(best)][static_cast<std::size_t>(i)])
                best = d;
        CHECK(am.values[static_cast<std::size_t>(i)] ==
              doctest::Approx((fovs[static_cast<std::size_t>(best)] - 100.0) / 400.0));
    }

    CHECK_THROWS_AS(gold_standard_map({{0.1}}, fovs, 1, 1), ConfigError);  // missing baselines
}

TEST_CASE("map_mse properties") {
    FoveationMap a, b;
    a.h = b.h = 2;
    a.w = b.w = 3;
    a.values = {0.1, 0.4, 0.3, 0.9, 0.0, 1.0};
    b.values = a.values;
    CHECK(map_mse(a, b) == 0.0);
    b.values = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    a.values = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(map_mse(a, b) == 1.0);
    RngStream rng(13);
    for (auto& v : a.values) v = rng.uniform();
    for (auto& v : b.values) v = rng.uniform();
    CHECK(map_mse(a, b) == map_mse(b, a));  // symmetric
    FoveationMap c;
    c.h = 3;
    c.w = 2;
    c.values.assign(6, 0.0);
    CHECK_THROWS_AS(map_mse(a, c), ContractViolation);
}

TEST_CASE("compute_scores exact cases") {
    LabelMap truth(4, 4, 0);
    for (int y = 2; y < 4; ++y)
        for (int x = 0; x < 4; ++x) truth.at(y, x) = 1;
    const ClassScores perfect = compute_scores(truth, truth, 2);
    CHECK(perfect.miou == 1.0);
    CHECK(perfect.iou[0] == 1.0);
    CHECK(perfect.iou[1] == 1.0);
    CHECK(perfect.pixel_acc[0] == 1.0);

    LabelMap complement = truth;
    for (auto& c : complement.classes) c = 1 - c;
    const ClassScores zero = compute_scores(complement, truth, 2);
    CHECK(zero.miou == 0.0);
    CHECK(zero.iou[0] == 0.0);
    CHECK(zero.iou[1] == 0.0);

    LabelMap ignored(4, 4, kIgnoreLabel);
    const ClassScores empty = compute_scores(truth, ignored, 2);
    CHECK(empty.empty);
}

TEST_CASE("compute_scores matches the set-arithmetic oracle on random maps") {
    RngStream rng(17);
    for (int it = 0; it < 250; ++it) {
        const int K = 3;
        LabelMap pred(4, 4), truth(4, 4);
        for (auto& c : pred.classes) c = static_cast<int>(rng.uniform_index(K));
        for (auto& c : truth.classes)
            c = rng.uniform() < 0.15 ? kIgnoreLabel : static_cast<int>(rng.uniform_index(K));
        const ClassScores scores = compute_scores(pred, truth, K);
        const auto [iou, miou] = oracle::iou_sets(pred.classes, truth.classes, K, kIgnoreLabel);
        bool any_valid = false;
        for (int c : truth.classes) any_valid |= (c != kIgnoreLabel);
        if (!any_valid) {
            CHECK(scores.empty);
            continue;
        }
        CHECK(scores.miou == doctest::Approx(miou).epsilon(1e-12));
        for (int c = 0; c < K; ++c) {
            if (iou[static_cast<std::size_t>(c)] < 0)
                CHECK(std::isnan(scores.iou[static_cast<std::size_t>(c)]));
            else
                CHECK(scores.iou[static_cast<std::size_t>(c)] ==
                      doctest::Approx(iou[static_cast<std::size_t>(c)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("segment_image on a single-tile image equals the single-patch prediction") {
    PatchSpec spec;
    spec.fovs = {16, 32};
    spec.lowres_rate = 0.25;
    SegConfig sc;
    sc.widths = {8, 12};
    sc.classes = 3;
    sc.out_size = 16;
    SegNet seg(sc, 71);
    ImageTensor img(16, 16, 1);
    RngStream rng(72);
    for (auto& v : img.values) v = rng.uniform();
    MemoryImage src(img);

    InferOptions opts;
    opts.mode = InferMode::kFixed;
    opts.fixed_d = 0;
    const auto result = segment_image(src, nullptr, seg, spec, opts);
    REQUIRE(result.grid.rows() == 1);
    REQUIRE(result.grid.cols() == 1);

    const PatchSet set = extract_patch_set_at(src, result.grid.tile_center_fr(0, 0), spec);
    const auto logits = seg.logits(set.patches[0]);
    for (int i = 0; i < 16 * 16; ++i) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (logits[static_cast<std::size_t>(i) * 3 + k] >
                logits[static_cast<std::size_t>(i) * 3 + best])
                best = k;
        CHECK(result.prediction.classes[static_cast<std::size_t>(i)] == best);
    }
}

TEST_CASE("segment_image: exact tiling is a disjoint union of tile predictions") {
    PatchSpec spec;
    spec.fovs = {16, 32};
    spec.lowres_rate = 0.25;
    SegConfig sc;
    sc.widths = {8, 12};
    sc.classes = 3;
    sc.out_size = 16;
    SegNet seg(sc, 73);
    ImageTensor img(32, 16, 1);
    RngStream rng(74);
    for (auto& v : img.values) v = rng.uniform();
    MemoryImage src(img);

    InferOptions opts;
    opts.mode = InferMode::kFixed;
    opts.fixed_d = 0;
    const auto result = segment_image(src, nullptr, seg, spec, opts);
    REQUIRE(result.grid.rows() == 2);
    REQUIRE(result.grid.cols() == 1);
    for (int half = 0; half < 2; ++half) {
        const PatchSet set = extract_patch_set_at(src, result.grid.tile_center_fr(half, 0), spec);
        const auto logits = seg.logits(set.patches[0]);
        for (int i = 0; i < 16 * 16; ++i) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (logits[static_cast<std::size_t>(i) * 3 + k] >
                    logits[static_cast<std::size_t>(i) * 3 + best])
                    best = k;
            CHECK(result.prediction.classes[static_cast<std::size_t>(half * 256 + i)] == best);
        }
    }
}

TEST_CASE("segment_image averages logits in overlap regions") {
    // 24 rows with 16-pixel tiles: two tiles overlap on rows 8..15.
    PatchSpec spec;
    spec.fovs = {16, 32};
    spec.lowres_rate = 0.25;
    SegConfig sc;
    sc.widths = {8, 12};
    sc.classes = 3;
    sc.out_size = 16;
    SegNet seg(sc, 75);
    ImageTensor img(24, 16, 1);
    RngStream rng(76);
    for (auto& v : img.values) v = rng.uniform();
    MemoryImage src(img);

    InferOptions opts;
    opts.mode = InferMode::kFixed;
    opts.fixed_d = 0;
    const auto result = segment_image(src, nullptr, seg, spec, opts);
    REQUIRE(result.grid.rows() == 2);
    CHECK(result.grid.row_tops == std::vector<int>{0, 8});

    // Hand composition of the two tiles.
    std::vector<double> acc(24 * 16 * 3, 0.0);
    std::vector<int> count(24 * 16, 0);
    for (int t = 0; t < 2; ++t) {
        const PatchSet set = extract_patch_set_at(src, result.grid.tile_center_fr(t, 0), spec);
        const auto logits = seg.logits(set.patches[0]);
        const int top = result.grid.row_tops[static_cast<std::size_t>(t)];
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c) {
                for (int k = 0; k < 3; ++k)
                    acc[((static_cast<std::size_t>(top + r)) * 16 + c) * 3 + k] +=
                        logits[(static_cast<std::size_t>(r) * 16 + c) * 3 + k];
                ++count[static_cast<std::size_t>(top + r) * 16 + c];
            }
    }
    for (int i = 0; i < 24 * 16; ++i) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (acc[static_cast<std::size_t>(i) * 3 + k] > acc[static_cast<std::size_t>(i) * 3 + best])
                best = k;
        CHECK(result.prediction.classes[static_cast<std::size_t>(i)] == best);
    }
}

TEST_CASE("segment_image fixed mode is bitwise identical to classical sliding window") {
    PatchSpec spec = small_spec();
    const Dataset data = tiny_dataset(1, 64, spec);
    SegConfig sc;
    sc.widths = {8, 12};
    sc.classes = 2;
    sc.out_size = 8;
    SegNet seg(sc, 77);
    const int d = 1;

    InferOptions opts;
    opts.mode = InferMode::kFixed;
    opts.fixed_d = d;
    const auto result = segment_image(*data.items[0].image, nullptr, seg, spec, opts);

    // Independent sliding-window inference with patch d.
    const auto& src = *data.items[0].image;
    const int fov0 = spec.fovs[0];
    const TileGrid grid = make_tile_grid(
        src.height(), src.width(), spec,
        std::max(1, static_cast<int>(std::lround(fov0 * spec.lowres_rate))));
    std::vector<double> acc(static_cast<std::size_t>(src.height()) * src.width() * 2, 0.0);
    for (int tr = 0; tr < grid.rows(); ++tr)
        for (int tc = 0; tc < grid.cols(); ++tc) {
            const PatchSet set = extract_patch_set_at(src, grid.tile_center_fr(tr, tc), spec);
            const auto logits = seg.logits(set.patches[static_cast<std::size_t>(d)]);
            for (int r = 0; r < fov0; ++r)
                for (int c = 0; c < fov0; ++c)
                    for (int k = 0; k < 2; ++k)
                        acc[((static_cast<std::size_t>(grid.row_tops[static_cast<std::size_t>(tr)] + r)) *
                                 src.width() +
                             grid.col_tops[static_cast<std::size_t>(tc)] + c) *
                                2 +
                            k] += logits[(static_cast<std::size_t>(r) * fov0 + c) * 2 + k];
        }
    for (std::size_t i = 0; i < static_cast<std::size_t>(src.height()) * src.width(); ++i) {
        const int best = acc[i * 2 + 1] > acc[i * 2 + 0] ? 1 : 0;
        CHECK(result.prediction.classes[i] == best);
    }
}

TEST_CASE("segment_image distribution modes read the foveation output") {
    PatchSpec spec = small_spec();
    const Dataset data = tiny_dataset(1, 64, spec);
    FoveationNet fov(1, 3, 79);
    SegConfig sc;
    sc.widths = {8, 12};
    sc.classes = 2;
    sc.out_size = 8;
    SegNet seg(sc, 81);

    for (const auto mode : {InferMode::kMean, InferMode::kArgmax}) {
        InferOptions opts;
        opts.mode = mode;
        const auto result = segment_image(*data.items[0].image, &fov, seg, spec, opts);
        CHECK(result.dist.valid());
        CHECK(result.prediction.height == 64);
        // A reduced distribution grid still covers every tile lookup.
        InferOptions coarse = opts;
        coarse.fov_grid_rate = 0.5;
        const auto r2 = segment_image(*data.items[0].image, &fov, seg, spec, coarse);
        CHECK(r2.dist.h < result.dist.h);
        CHECK(r2.prediction.height == 64);
    }
    InferOptions bad;
    bad.mode = InferMode::kMean;
    CHECK_THROWS_AS(segment_image(*data.items[0].image, nullptr, seg, spec, bad), ConfigError);
}

TEST_CASE("baseline_tile_miou rewards the matching baseline") {
    // Two baselines; baseline 0 is a perfect constant-class predictor for the
    // constant truth, baseline 1 predicts the other class via its head bias.
    PatchSpec spec;
    spec.fovs = {8, 16};
    spec.lowres_rate = 0.25;
    SegConfig sc;
    sc.widths = {8};
    sc.classes = 2;
    sc.out_size = 8;
    SegNet good(sc, 83), bad(sc, 85);
    for (auto& p : good.params().items())
        if (p->name.find(".w") != std::string::npos)
            std::fill(p->value.begin(), p->value.end(), 0.0);
    for (auto& p : bad.params().items())
        if (p->name.find(".w") != std::string::npos)
            std::fill(p->value.begin(), p->value.end(), 0.0);
    good.params().find("seg.head.b")->value = {1.0, 0.0};
    bad.params().find("seg.head.b")->value = {0.0, 1.0};

    ImageTensor img(16, 16, 1, 0.4);
    LabelMap truth(16, 16, 0);
    MemoryImage src(std::move(img));
    const auto maps = baseline_tile_miou(src, truth, {&good, &bad}, spec, 1);
    REQUIRE(maps.size() == 2);
    for (double v : maps[0]) CHECK(v == 1.0);
    for (double v : maps[1]) CHECK(v == 0.0);
}

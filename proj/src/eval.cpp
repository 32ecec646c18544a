// SPDX-License-Identifier: Apache-2.0

#include "fovseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fovseg/parallel.hpp"

namespace fovseg {

namespace {

double weighted_fov01(std::span<const double> f, const std::vector<int>& fovs) {
    const double lo = fovs.front(), hi = fovs.back();
    if (hi <= lo) return 0.0;  // degenerate range
    double acc = 0.0;
    for (std::size_t d = 0; d < f.size(); ++d) acc += f[d] * fovs[d];
    return (acc - lo) / (hi - lo);
}

}  // namespace

FoveationMap foveation_map(const PatchDistribution& dist, const std::vector<int>& fovs) {
    FOV_REQUIRE(static_cast<int>(fovs.size()) == dist.d, "foveation_map: FoV count mismatch");
    FoveationMap map;
    map.h = dist.h;
    map.w = dist.w;
    map.values.resize(static_cast<std::size_t>(dist.h) * dist.w);
    for (int r = 0; r < dist.h; ++r)
        for (int c = 0; c < dist.w; ++c)
            map.values[static_cast<std::size_t>(r) * dist.w + c] = weighted_fov01(dist.at(r, c), fovs);
    return map;
}

FoveationMap foveation_map_on_grid(const PatchDistribution& dist, const std::vector<int>& fovs,
                                   const TileGrid& grid, double dist_rate) {
    FOV_REQUIRE(static_cast<int>(fovs.size()) == dist.d, "foveation_map: FoV count mismatch");
    FoveationMap map;
    map.h = grid.rows();
    map.w = grid.cols();
    map.values.resize(static_cast<std::size_t>(map.h) * map.w);
    for (int r = 0; r < map.h; ++r)
        for (int c = 0; c < map.w; ++c) {
            const auto [cy, cx] = grid.tile_center_fr(r, c);
            const int lr = std::clamp(static_cast<int>(std::lround((cy + 0.5) * dist_rate - 0.5)),
                                      0, dist.h - 1);
            const int lc = std::clamp(static_cast<int>(std::lround((cx + 0.5) * dist_rate - 0.5)),
                                      0, dist.w - 1);
            map.values[static_cast<std::size_t>(r) * map.w + c] =
                weighted_fov01(dist.at(lr, lc), fovs);
        }
    return map;
}

FoveationMap gold_standard_map(const std::vector<std::vector<double>>& tile_miou,
                               const std::vector<int>& fovs, int rows, int cols) {
    FOV_CONFIG_REQUIRE(tile_miou.size() == fovs.size(),
                       "gold_standard_map: need one mIoU map per baseline");
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    for (const auto& m : tile_miou)
        FOV_CONFIG_REQUIRE(m.size() == n, "gold_standard_map: mIoU map size mismatch");
    const std::size_t D = fovs.size();
    FoveationMap map;
    map.h = rows;
    map.w = cols;
    map.values.resize(n);
    std::vector<double> w(D);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            w[d] = std::max(0.0, tile_miou[d][i]);
            total += w[d];
        }
        if (total <= 0.0)
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(D));
        else
            for (auto& x : w) x /= total;
        map.values[i] = weighted_fov01(w, fovs);
    }
    return map;
}

FoveationMap gold_standard_argmax_map(const std::vector<std::vector<double>>& tile_miou,
                                      const std::vector<int>& fovs, int rows, int cols) {
    FOV_CONFIG_REQUIRE(tile_miou.size() == fovs.size(),
                       "gold_standard_argmax_map: need one mIoU map per baseline");
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    const double lo = fovs.front(), hi = fovs.back();
    FoveationMap map;
    map.h = rows;
    map.w = cols;
    map.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t d = 1; d < fovs.size(); ++d)
            if (tile_miou[d][i] > tile_miou[best][i]) best = d;
        map.values[i] = hi > lo ? (fovs[best] - lo) / (hi - lo) : 0.0;
    }
    return map;
}

double map_mse(const FoveationMap& a, const FoveationMap& b) {
    FOV_REQUIRE(a.h == b.h && a.w == b.w, "map_mse: shape mismatch");
    FOV_REQUIRE(!a.values.empty(), "map_mse: empty maps");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.values.size());
}

ClassScores compute_scores(const LabelMap& pred, const LabelMap& truth, int classes) {
    FOV_REQUIRE(pred.height == truth.height && pred.width == truth.width,
                "compute_scores: shape mismatch");
    ClassScores out;
    out.classes = classes;
    std::vector<long> inter(classes, 0), pred_n(classes, 0), truth_n(classes, 0);
    long valid = 0;
    for (std::size_t i = 0; i < truth.classes.size(); ++i) {
        const int t = truth.classes[i];
        if (t == kIgnoreLabel) continue;
        ++valid;
        const int p = pred.classes[i];
        if (t >= 0 && t < classes) ++truth_n[t];
        if (p >= 0 && p < classes) ++pred_n[p];
        if (p == t) ++inter[t];
    }
    if (valid == 0) {
        out.empty = true;
        out.iou.assign(classes, std::nan(""));
        out.pixel_acc.assign(classes, std::nan(""));
        return out;
    }
    out.iou.resize(classes);
    out.pixel_acc.resize(classes);
    double miou_sum = 0.0;
    int miou_n = 0;
    for (int c = 0; c < classes; ++c) {
        const long uni = pred_n[c] + truth_n[c] - inter[c];
        out.iou[c] = uni > 0 ? static_cast<double>(inter[c]) / static_cast<double>(uni)
                             : std::nan("");
        out.pixel_acc[c] = truth_n[c] > 0
                               ? static_cast<double>(inter[c]) / static_cast<double>(truth_n[c])
                               : std::nan("");
        if (truth_n[c] > 0) {
            miou_sum += out.iou[c];
            ++miou_n;
        }
    }
    out.miou = miou_n > 0 ? miou_sum / miou_n : 0.0;
    return out;
}

void write_scores_csv(const std::string& path, const ClassScores& scores) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "class,iou,pixel_accuracy\n";
    os.precision(17);
    for (int c = 0; c < scores.classes; ++c) {
        os << c << ",";
        if (std::isnan(scores.iou[c])) os << "na"; else os << scores.iou[c];
        os << ",";
        if (std::isnan(scores.pixel_acc[c])) os << "na"; else os << scores.pixel_acc[c];
        os << "\n";
    }
    os << "mean," << scores.miou << ",\n";
    if (!os) throw IoError("write failed: " + path);
}

InferMode infer_mode_for_train_mode(const std::string& train_mode) {
    if (train_mode == "mean") return InferMode::kMean;
    if (train_mode == "gsm" || train_mode == "mode") return InferMode::kArgmax;
    if (train_mode.rfind("fixed", 0) == 0) return InferMode::kFixed;
    if (train_mode == "random") return InferMode::kRandom;
    if (train_mode == "average") return InferMode::kAverage;
    throw ConfigError("unknown train mode: " + train_mode);
}

SegmentationResult segment_image(const ImageSource& image, FoveationNet* fov, SegNet& seg,
                                 const PatchSpec& spec, const InferOptions& opts) {
    spec.validate();
    const int H = image.height(), W = image.width();
    const int K = seg.config().classes;
    const int fov0 = spec.fovs.front();
    const int S = spec.s();
    const double rate = spec.lowres_rate;

    const int stride_lr = std::max(1, static_cast<int>(std::lround(fov0 * rate)));
    TileGrid grid = make_tile_grid(H, W, spec, stride_lr);
    const int n_tiles = grid.rows() * grid.cols();

    const bool needs_dist = opts.mode == InferMode::kMean || opts.mode == InferMode::kArgmax;
    SegmentationResult result;
    result.grid = grid;
    if (needs_dist) {
        FOV_CONFIG_REQUIRE(fov != nullptr, "segment_image: mode requires a foveation model");
        FOV_REQUIRE(opts.fov_grid_rate > 0.0 && opts.fov_grid_rate <= 1.0,
                    "segment_image: fov_grid_rate must be in (0,1]");
        ImageTensor full(H, W, image.channels());
        image.read_region(0, 0, H, W, full.values.data());
        result.dist_rate = rate * opts.fov_grid_rate;
        result.dist = fov->forward_dist(make_lowres(full, result.dist_rate));
        result.dist_h = result.dist.h;
        result.dist_w = result.dist.w;
    }

    // Phase 1 (parallel): per-tile logits over the tile footprint.
    std::vector<std::vector<double>> tile_logits(static_cast<std::size_t>(n_tiles));
    parallel_for(static_cast<std::size_t>(n_tiles), opts.threads, [&](std::size_t idx) {
        const int tr = static_cast<int>(idx) / grid.cols();
        const int tc = static_cast<int>(idx) % grid.cols();
        PatchSet set = extract_patch_set_at(image, grid.tile_center_fr(tr, tc), spec);

        std::vector<double> logits;
        if (opts.mode == InferMode::kEnsemble) {
            for (std::size_t d = 0; d < set.patches.size(); ++d) {
                auto l = seg.logits(set.patches[d]);
                if (d == 0)
                    logits = std::move(l);
                else
                    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += l[i];
            }
            for (auto& v : logits) v /= static_cast<double>(set.patches.size());
        } else {
            ImageTensor input;
            switch (opts.mode) {
                case InferMode::kFixed: {
                    FOV_CONFIG_REQUIRE(opts.fixed_d >= 0 && opts.fixed_d < spec.d(),
                                       "segment_image: fixed_d out of range");
                    input = set.patches[static_cast<std::size_t>(opts.fixed_d)];
                    break;
                }
                case InferMode::kRandom: {
                    RngStream rng = RngStream::derive(opts.seed, "infer.random", idx);
                    input = set.patches[rng.uniform_index(set.patches.size())];
                    break;
                }
                case InferMode::kAverage: {
                    input = ImageTensor(S, S, image.channels());
                    const double w = 1.0 / static_cast<double>(set.patches.size());
                    for (const auto& p : set.patches)
                        for (std::size_t i = 0; i < input.values.size(); ++i)
                            input.values[i] += w * p.values[i];
                    break;
                }
                case InferMode::kMean:
                case InferMode::kArgmax: {
                    const auto [cy, cx] = grid.tile_center_fr(tr, tc);
                    const int lr = std::clamp(
                        static_cast<int>(std::lround((cy + 0.5) * result.dist_rate - 0.5)), 0,
                        result.dist.h - 1);
                    const int lc = std::clamp(
                        static_cast<int>(std::lround((cx + 0.5) * result.dist_rate - 0.5)), 0,
                        result.dist.w - 1);
                    const auto f = result.dist.at(lr, lc);
                    if (opts.mode == InferMode::kArgmax) {
                        input = set.patches[argmax_index(f)];
                    } else {
                        input = ImageTensor(S, S, image.channels());
                        for (std::size_t d = 0; d < set.patches.size(); ++d) {
                            if (f[d] == 0.0) continue;
                            for (std::size_t i = 0; i < input.values.size(); ++i)
                                input.values[i] += f[d] * set.patches[d].values[i];
                        }
                    }
                    break;
                }
                default:
                    throw ConfigError("segment_image: unhandled mode");
            }
            logits = seg.logits(input);
        }

        if (S != fov0) {
            ImageTensor as_img(S, S, K);
            as_img.values = std::move(logits);
            logits = resize_bilinear(as_img, fov0, fov0).values;
        }
        tile_logits[idx] = std::move(logits);
    });

    // Phase 2 (serial, tile order): seam-averaged aggregation.
    std::vector<double> acc(static_cast<std::size_t>(H) * W * K, 0.0);
    std::vector<int> count(static_cast<std::size_t>(H) * W, 0);
    for (int idx = 0; idx < n_tiles; ++idx) {
        const int tr = idx / grid.cols();
        const int tc = idx % grid.cols();
        const int top = grid.row_tops[tr], left = grid.col_tops[tc];
        const auto& logits = tile_logits[static_cast<std::size_t>(idx)];
        for (int r = 0; r < fov0; ++r) {
            const int y = top + r;
            if (y < 0 || y >= H) continue;
            for (int c = 0; c < fov0; ++c) {
                const int x = left + c;
                if (x < 0 || x >= W) continue;
                const std::size_t src = (static_cast<std::size_t>(r) * fov0 + c) * K;
                const std::size_t dst = (static_cast<std::size_t>(y) * W + x) * K;
                for (int k = 0; k < K; ++k) acc[dst + k] += logits[src + k];
                ++count[static_cast<std::size_t>(y) * W + x];
            }
        }
    }

    result.prediction = LabelMap(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const std::size_t pi = static_cast<std::size_t>(y) * W + x;
            FOV_REQUIRE(count[pi] > 0, "segment_image: uncovered pixel");
            const double* z = acc.data() + pi * K;
            int best = 0;
            for (int k = 1; k < K; ++k)
                if (z[k] > z[best]) best = k;
            result.prediction.classes[pi] = best;
        }
    return result;
}

std::vector<std::vector<double>> baseline_tile_miou(const ImageSource& image,
                                                    const LabelMap& truth,
                                                    const std::vector<SegNet*>& baselines,
                                                    const PatchSpec& spec, int threads) {
    spec.validate();
    FOV_CONFIG_REQUIRE(baselines.size() == static_cast<std::size_t>(spec.d()),
                       "baseline_tile_miou: need one baseline model per FoV");
    const int H = image.height(), W = image.width();
    const int fov0 = spec.fovs.front();
    const int S = spec.s();
    const int stride_lr = std::max(1, static_cast<int>(std::lround(fov0 * spec.lowres_rate)));
    const TileGrid grid = make_tile_grid(H, W, spec, stride_lr);
    const int n_tiles = grid.rows() * grid.cols();
    const std::size_t D = baselines.size();

    std::vector<std::vector<double>> miou(D, std::vector<double>(static_cast<std::size_t>(n_tiles), 0.0));
    parallel_for(static_cast<std::size_t>(n_tiles), threads, [&](std::size_t idx) {
        const int tr = static_cast<int>(idx) / grid.cols();
        const int tc = static_cast<int>(idx) % grid.cols();
        PatchSet set = extract_patch_set_at(image, grid.tile_center_fr(tr, tc), spec);
        const int top = grid.row_tops[tr], left = grid.col_tops[tc];
        // Truth crop over the tile footprint.
        LabelMap tile_truth(fov0, fov0);
        for (int r = 0; r < fov0; ++r)
            for (int c = 0; c < fov0; ++c) {
                const int y = top + r, x = left + c;
                tile_truth.at(r, c) =
                    (y >= 0 && y < H && x >= 0 && x < W) ? truth.at(y, x) : kIgnoreLabel;
            }
        for (std::size_t d = 0; d < D; ++d) {
            const int K = baselines[d]->config().classes;
            auto logits = baselines[d]->logits(set.patches[d]);
            if (S != fov0) {
                ImageTensor as_img(S, S, K);
                as_img.values = std::move(logits);
                logits = resize_bilinear(as_img, fov0, fov0).values;
            }
            LabelMap pred(fov0, fov0);
            for (int i = 0; i < fov0 * fov0; ++i) {
                const double* z = logits.data() + static_cast<std::size_t>(i) * K;
                int best = 0;
                for (int k = 1; k < K; ++k)
                    if (z[k] > z[best]) best = k;
                pred.classes[static_cast<std::size_t>(i)] = best;
            }
            const ClassScores s = compute_scores(pred, tile_truth, K);
            miou[d][idx] = s.empty ? 0.0 : s.miou;
        }
    });
    return miou;
}

}  // namespace fovseg

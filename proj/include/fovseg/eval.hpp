// SPDX-License-Identifier: Apache-2.0
//
// Full-image segmentation by tile aggregation, foveation/gold-standard maps,
// and IoU/mIoU/pixel-accuracy metrics.

#pragma once

#include <optional>
#include <string>

#include "fovseg/foveation.hpp"
#include "fovseg/segnet.hpp"

namespace fovseg {

// h x w map of min-max normalized probability-weighted FoVs:
// 1 = largest FoV (lowest resolution), 0 = smallest FoV.
struct FoveationMap {
    int h = 0, w = 0;
    std::vector<double> values;  // in [0,1]
};

// m[i] = (sum_d f_d * fov_d - fov_min) / (fov_max - fov_min); all zeros when
// the FoV range is degenerate (D == 1).
FoveationMap foveation_map(const PatchDistribution& dist, const std::vector<int>& fovs);

// Same computation sampled only at tile centers (the gold-standard grid).
FoveationMap foveation_map_on_grid(const PatchDistribution& dist, const std::vector<int>& fovs,
                                   const TileGrid& grid, double dist_rate);

// Per tile: weights = per-baseline tile mIoU normalized to sum 1 (all-zero ->
// uniform), then the same weighted FoV average and min-max normalization.
// tile_miou[d] is a rows*cols row-major map for baseline d.
FoveationMap gold_standard_map(const std::vector<std::vector<double>>& tile_miou,
                               const std::vector<int>& fovs, int rows, int cols);
// Winner-take-all variant: the FoV of the most performant baseline per tile.
FoveationMap gold_standard_argmax_map(const std::vector<std::vector<double>>& tile_miou,
                                      const std::vector<int>& fovs, int rows, int cols);

double map_mse(const FoveationMap& a, const FoveationMap& b);

struct ClassScores {
    int classes = 0;
    std::vector<double> iou;        // NaN when the class has empty union
    std::vector<double> pixel_acc;  // NaN when the class is absent from truth
    double miou = 0.0;              // over classes present in truth
    bool empty = false;             // no valid pixels at all
};
ClassScores compute_scores(const LabelMap& pred, const LabelMap& truth, int classes);
void write_scores_csv(const std::string& path, const ClassScores& scores);

enum class InferMode { kMean, kArgmax, kFixed, kRandom, kAverage, kEnsemble };
InferMode infer_mode_for_train_mode(const std::string& train_mode);

struct InferOptions {
    InferMode mode = InferMode::kArgmax;
    int fixed_d = 0;
    double fov_grid_rate = 1.0;  // extra downsampling of the distribution grid
    std::uint64_t seed = 1;      // kRandom tile draws
    int threads = 1;
};

struct SegmentationResult {
    LabelMap prediction;
    PatchDistribution dist;  // distribution over the (possibly reduced) grid
    TileGrid grid;
    int dist_h = 0, dist_w = 0;
    double dist_rate = 0.0;  // lowres rate actually used for the distribution
};

// Tiles the image at stride = smallest FoV, picks the per-tile patch by mode,
// and averages logits across overlapping tile borders before the argmax.
// `fov` may be null for modes that never read the distribution.
SegmentationResult segment_image(const ImageSource& image, FoveationNet* fov, SegNet& seg,
                                 const PatchSpec& spec, const InferOptions& opts);

// Per-tile mIoU maps of D fixed-patch baseline models on the shared grid
// (rows*cols row-major, one map per baseline).
std::vector<std::vector<double>> baseline_tile_miou(const ImageSource& image,
                                                    const LabelMap& truth,
                                                    const std::vector<SegNet*>& baselines,
                                                    const PatchSpec& spec, int threads);

}  // namespace fovseg

// SPDX-License-Identifier: Apache-2.0
//
// Joint optimization of the foveation module and the segmentation network,
// plus the fixed/random/average baseline modes where the foveation output is
// overridden and theta receives no gradient.

#pragma once

#include <optional>
#include <string>

#include "fovseg/dataset.hpp"
#include "fovseg/eval.hpp"
#include "fovseg/foveation.hpp"
#include "fovseg/segnet.hpp"

namespace fovseg {

enum class TrainMode { kMean, kGsm, kMode, kFixed, kRandom, kAverage };

struct ParsedMode {
    TrainMode mode = TrainMode::kMean;
    int fixed_d = 0;  // only for kFixed
};
// Accepts "mean", "gsm", "mode", "fixed-<d>", "random", "average".
ParsedMode parse_train_mode(const std::string& text);

struct TrainConfig {
    std::string mode = "mean";
    int images_per_batch = 2;     // L
    int locations_per_image = 4;  // B
    long iterations = 2000;       // T
    double lr0 = 2e-5;
    double lr_power = 0.9;
    AdamConfig adam;
    std::uint64_t seed = 1;
    PatchSpec patch;
    TemperatureSchedule tau;  // rate 0 resolves to 1/iterations
    long val_interval = 100;
    double bn_momentum = 0.1;
    int threads = 1;

    int total_patches() const { return images_per_batch * locations_per_image; }
    TemperatureSchedule resolved_tau() const {
        TemperatureSchedule t = tau;
        if (t.rate == 0.0 && iterations > 0) t.rate = 1.0 / static_cast<double>(iterations);
        return t;
    }
};

struct MinibatchEntry {
    int item_index = 0;
    std::pair<int, int> loc_lr{0, 0};
    PatchSet patches;
    std::vector<int> labels;  // S*S smallest-FoV annotation
};

// Samples L images (without replacement while possible) and B locations per
// image from the data stream, then extracts patch sets and label patches.
std::vector<MinibatchEntry> build_minibatch(const Dataset& data, const TrainConfig& cfg,
                                            RngStream& rng);

struct RunLogRow {
    long iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
    double tau = 0.0;
    std::optional<double> val_miou;
};

struct RunLog {
    std::vector<RunLogRow> rows;
    double wall_seconds = 0.0;  // reported in the manifest, not the CSV
    void write_csv(const std::string& path) const;
};

struct TrainResult {
    RunLog log;
    double best_val_miou = -1.0;
    long best_iteration = -1;
};

// Thrown when a training loss turns non-finite; carries the offending sample.
struct TrainingError : std::runtime_error {
    TrainingError(const std::string& msg, std::string item, std::pair<int, int> loc)
        : std::runtime_error(msg), item_id(std::move(item)), location(loc) {}
    std::string item_id;
    std::pair<int, int> location;
};

class Trainer {
public:
    Trainer(FoveationNet& fov, SegNet& seg, TrainConfig cfg);

    // One optimizer step over a prepared minibatch at iteration t. Returns the
    // batch-mean loss.
    double train_step(const Dataset& data, const std::vector<MinibatchEntry>& batch, long t);

    // Full loop with periodic validation; checkpoints the best-validation-mIoU
    // parameters under out_dir (pass "" to skip file output).
    TrainResult fit(const Dataset& train_data, const Dataset& val_data,
                    const std::string& out_dir);

    double validate(const Dataset& val_data);

    Adam& optimizer() { return *adam_; }
    const ParsedMode& parsed_mode() const { return mode_; }
    const TrainConfig& config() const { return cfg_; }

private:
    FoveationNet& fov_;
    SegNet& seg_;
    TrainConfig cfg_;
    ParsedMode mode_;
    std::unique_ptr<Adam> adam_;
};

}  // namespace fovseg

// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: a pure (no-gradient-harvest, no-state-update) batch
// loss matching the trainer's forward path, and small dataset builders.

#pragma once

#include "fovseg/trainer.hpp"
#include "oracles.hpp"

namespace testsup {

using namespace fovseg;

// Mean loss over a minibatch along the same forward path train_step uses.
// Pure in the parameters: BN runs in train mode (batch statistics) and no
// running moments are touched, so repeated calls are suitable for finite
// differences.
inline double forward_batch_loss(FoveationNet& fov, SegNet& seg, const Dataset& data,
                                 const std::vector<MinibatchEntry>& batch,
                                 const ParsedMode& mode, double tau, long t,
                                 std::uint64_t seed) {
    const int D = fov.d();
    const int P = static_cast<int>(batch.size());

    // Foveation forward per distinct image.
    std::vector<int> image_items;
    std::vector<int> image_of_patch(batch.size());
    for (std::size_t p = 0; p < batch.size(); ++p) {
        int slot = -1;
        for (std::size_t i = 0; i < image_items.size(); ++i)
            if (image_items[i] == batch[p].item_index) slot = static_cast<int>(i);
        if (slot < 0) {
            slot = static_cast<int>(image_items.size());
            image_items.push_back(batch[p].item_index);
        }
        image_of_patch[p] = slot;
    }
    const bool trains_theta = mode.mode == TrainMode::kMean || mode.mode == TrainMode::kGsm ||
                              mode.mode == TrainMode::kMode;
    std::vector<Graph> fov_graphs(image_items.size());
    std::vector<TensorPtr> dists(image_items.size());
    if (trains_theta) {
        for (std::size_t i = 0; i < image_items.size(); ++i) {
            const ImageTensor& lr = *data.items[static_cast<std::size_t>(image_items[i])].lowres;
            auto in = fov_graphs[i].constant({lr.height, lr.width, lr.channels}, lr.values);
            dists[i] = fov.forward(fov_graphs[i], in, /*train=*/true, nullptr);
        }
    }

    double total = 0.0;
    for (std::size_t p = 0; p < batch.size(); ++p) {
        const MinibatchEntry& e = batch[p];
        Graph g;
        std::vector<double> f(static_cast<std::size_t>(D), 0.0);
        if (trains_theta) {
            const auto& dist = dists[static_cast<std::size_t>(image_of_patch[p])];
            const int wlr = dist->dim(1);
            std::copy_n(dist->value.data() +
                            (static_cast<std::size_t>(e.loc_lr.first) * wlr + e.loc_lr.second) * D,
                        D, f.begin());
        } else if (mode.mode == TrainMode::kFixed) {
            f[static_cast<std::size_t>(mode.fixed_d)] = 1.0;
        } else if (mode.mode == TrainMode::kRandom) {
            RngStream rng = RngStream::derive(
                seed, "sampling.random", static_cast<std::uint64_t>(t) * P + p);
            f[rng.uniform_index(static_cast<std::uint64_t>(D))] = 1.0;
        } else {
            std::fill(f.begin(), f.end(), 1.0 / D);
        }
        auto f_node = g.constant({D}, f);

        TensorPtr input;
        if (mode.mode == TrainMode::kMode) {
            input = mode_select(g, f_node, e.patches);
        } else if (mode.mode == TrainMode::kGsm) {
            RngStream rng =
                RngStream::derive(seed, "sampling.gsm", static_cast<std::uint64_t>(t) * P + p);
            input = mean_combine(g, gsm_sample(g, f_node, tau, rng), e.patches);
        } else {
            input = mean_combine(g, f_node, e.patches);
        }
        auto logits = seg.forward(g, input, /*train=*/true, nullptr);
        total += cross_entropy(g, logits, e.labels, kIgnoreLabel).loss->value[0];
    }
    return total / static_cast<double>(P);
}

// Tiny in-memory dataset: vertical-stripe class 0 vs horizontal class 1,
// deterministic, with all-finite values.
inline Dataset tiny_dataset(int n_images, int size, const PatchSpec& spec,
                            std::uint64_t seed = 99, int classes = 2) {
    Dataset data;
    data.classes = classes;
    for (int i = 0; i < n_images; ++i) {
        RngStream rng = RngStream::derive(seed, "tiny", static_cast<std::uint64_t>(i));
        ImageTensor img(size, size, 1);
        LabelMap lab(size, size, 0);
        const int band = size / 2;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const int cls = (x < band) ? 0 : 1;
                lab.at(y, x) = cls;
                const bool bright = cls == 0 ? (x % 2 == 0) : (y % 2 == 0);
                img.at(y, x, 0) = (bright ? 0.8 : 0.3) + 0.02 * rng.uniform();
            }
        data.items.push_back(make_dataset_item("tiny" + std::to_string(i), std::move(img),
                                               std::move(lab), spec));
    }
    return data;
}

inline PatchSpec small_spec() {
    PatchSpec spec;
    spec.fovs = {8, 16, 32};
    spec.out_size = 8;
    spec.lowres_rate = 0.125;
    return spec;
}

inline std::vector<double> snapshot_values(const ParamSet& ps) {
    std::vector<double> out;
    for (const auto& p : ps.items()) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
}

}  // namespace testsup

// SPDX-License-Identifier: Apache-2.0
//
// The foveation network F_theta and the patch-selection machinery: categorical
// sampling, Gumbel-Softmax relaxation, probability-weighted blending and
// hard argmax selection with straight-through gradients, plus the temperature
// schedule.

#pragma once

#include <span>

#include "fovseg/image.hpp"
#include "fovseg/nn.hpp"
#include "fovseg/patch.hpp"
#include "fovseg/rng.hpp"

namespace fovseg {

struct PatchDistribution {
    int h = 0, w = 0, d = 0;
    std::vector<double> probs;  // [h,w,D]; sums to 1 at every location

    std::span<const double> at(int r, int c) const {
        return {probs.data() + (static_cast<std::size_t>(r) * w + c) * d,
                static_cast<std::size_t>(d)};
    }
    // Sum-to-one within tol at every location, all entries in [0,1].
    bool valid(double tol = 1e-6) const;
};

// tau(t) = max(floor, exp(-rate * t)); non-increasing, floor-clamped.
struct TemperatureSchedule {
    double floor = 0.10;
    double rate = 0.0;  // 1 / total iterations by default (see TrainConfig)
};
double tau_at(const TemperatureSchedule& sched, long t);

// Three 3x3 conv blocks (kernel counts {40, 40, D}) each followed by
// BatchNorm and ReLU, with a channel softmax at the end. Fully convolutional:
// output spatial dims equal input dims.
class FoveationNet {
public:
    FoveationNet(int in_channels, int d, std::uint64_t init_seed,
                 std::vector<int> hidden = {40, 40});

    // Graph forward over a low-res image leaf; output [h,w,D].
    TensorPtr forward(Graph& g, const TensorPtr& lowres, bool train, ForwardTrace* trace);

    // Convenience eval forward straight to a distribution.
    PatchDistribution forward_dist(const ImageTensor& lowres);

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    std::vector<Parameter*> trainable_params();
    int d() const { return d_; }
    int in_channels() const { return in_channels_; }

private:
    int in_channels_;
    int d_;
    std::vector<int> hidden_;
    ParamSet params_;
};

// Inverse-CDF draw from a probability vector (entries must be nonnegative and
// sum to 1 within 1e-6).
std::size_t sample_categorical(std::span<const double> probs, RngStream& rng);

// Gumbel-Softmax sample as a graph op: softmax((clamped_log(probs) + G)/tau).
// Fresh Gumbel noise per call; gradients flow into probs.
TensorPtr gsm_sample(Graph& g, const TensorPtr& probs, double tau, RngStream& rng);

// Non-graph variant for inference/analysis.
std::vector<double> gsm_weights(std::span<const double> probs, double tau, RngStream& rng);

// E[x] = sum_d f_d * patch_d; differentiable w.r.t. f.
TensorPtr mean_combine(Graph& g, const TensorPtr& f, const PatchSet& patches);

// patches[argmax f] forward (ties -> lowest index), straight-through backward.
TensorPtr mode_select(Graph& g, const TensorPtr& f, const PatchSet& patches);

}  // namespace fovseg

// SPDX-License-Identifier: Apache-2.0

#include "fovseg/foveation.hpp"

#include <cmath>

#include "fovseg/common.hpp"

namespace fovseg {

bool PatchDistribution::valid(double tol) const {
    if (probs.size() != static_cast<std::size_t>(h) * w * d) return false;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (double v : at(r, c)) {
                if (!(v >= 0.0 && v <= 1.0 + tol)) return false;
                s += v;
            }
            if (std::abs(s - 1.0) > tol) return false;
        }
    return true;
}

double tau_at(const TemperatureSchedule& sched, long t) {
    FOV_REQUIRE(t >= 0, "tau_at: negative iteration");
    return std::max(sched.floor, std::exp(-sched.rate * static_cast<double>(t)));
}

FoveationNet::FoveationNet(int in_channels, int d, std::uint64_t init_seed,
                           std::vector<int> hidden)
    : in_channels_(in_channels), d_(d), hidden_(std::move(hidden)) {
    FOV_CONFIG_REQUIRE(in_channels >= 1 && d >= 1, "FoveationNet: bad channel config");
    int cin = in_channels_;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const std::string prefix = "fov.layer" + std::to_string(l);
        register_conv(params_, prefix + ".conv", 3, cin, hidden_[l], false, init_seed);
        register_bn(params_, prefix + ".bn", hidden_[l]);
        cin = hidden_[l];
    }
    const std::string last = "fov.layer" + std::to_string(hidden_.size());
    register_conv(params_, last + ".conv", 3, cin, d_, false, init_seed);
    register_bn(params_, last + ".bn", d_);
}

TensorPtr FoveationNet::forward(Graph& g, const TensorPtr& lowres, bool train,
                                ForwardTrace* trace) {
    FOV_CONFIG_REQUIRE(lowres->shape.size() == 3 && lowres->dim(2) == in_channels_,
                       "FoveationNet: input channel mismatch");
    TensorPtr x = lowres;
    for (std::size_t l = 0; l <= hidden_.size(); ++l)
        x = conv_block(g, x, params_, "fov.layer" + std::to_string(l), 1, train, trace);
    return softmax_channel(g, x);
}

PatchDistribution FoveationNet::forward_dist(const ImageTensor& lowres) {
    Graph g;
    auto in = g.constant({lowres.height, lowres.width, lowres.channels}, lowres.values);
    auto out = forward(g, in, /*train=*/false, nullptr);
    PatchDistribution dist;
    dist.h = lowres.height;
    dist.w = lowres.width;
    dist.d = d_;
    dist.probs = out->value;
    return dist;
}

std::vector<Parameter*> FoveationNet::trainable_params() {
    std::vector<Parameter*> out;
    for (auto& p : params_.items())
        if (p->trainable) out.push_back(p.get());
    return out;
}

std::size_t sample_categorical(std::span<const double> probs, RngStream& rng) {
    FOV_REQUIRE(!probs.empty(), "sample_categorical: empty distribution");
    double total = 0.0;
    for (double p : probs) {
        FOV_REQUIRE(p >= 0.0, "sample_categorical: negative probability");
        total += p;
    }
    FOV_REQUIRE(std::abs(total - 1.0) <= 1e-6, "sample_categorical: probabilities must sum to 1");
    const double u = rng.uniform() * total;
    double cdf = 0.0;
    for (std::size_t d = 0; d < probs.size(); ++d) {
        cdf += probs[d];
        if (u < cdf) return d;
    }
    return probs.size() - 1;
}

TensorPtr gsm_sample(Graph& g, const TensorPtr& probs, double tau, RngStream& rng) {
    FOV_REQUIRE(tau > 0.0, "gsm_sample: tau must be positive");
    FOV_REQUIRE(probs->shape.size() == 1, "gsm_sample: probs must be a vector");
    std::vector<double> noise(probs->size());
    for (auto& n : noise) n = rng.gumbel();
    auto logits = clamped_log(g, probs);
    auto perturbed = add_constant(g, logits, noise);
    auto scaled = scale_by(g, perturbed, 1.0 / tau);
    return softmax_vec(g, scaled);
}

std::vector<double> gsm_weights(std::span<const double> probs, double tau, RngStream& rng) {
    Graph g;
    auto p = g.constant({static_cast<int>(probs.size())},
                        std::vector<double>(probs.begin(), probs.end()));
    return gsm_sample(g, p, tau, rng)->value;
}

static std::vector<std::span<const double>> patch_spans(const PatchSet& patches) {
    std::vector<std::span<const double>> spans;
    spans.reserve(patches.patches.size());
    for (const auto& p : patches.patches) spans.emplace_back(p.values);
    return spans;
}

TensorPtr mean_combine(Graph& g, const TensorPtr& f, const PatchSet& patches) {
    FOV_REQUIRE(f->size() == patches.patches.size(), "mean_combine: weight/patch count mismatch");
    const auto& p0 = patches.patches.front();
    return weighted_blend(g, f, patch_spans(patches), {p0.height, p0.width, p0.channels});
}

TensorPtr mode_select(Graph& g, const TensorPtr& f, const PatchSet& patches) {
    FOV_REQUIRE(f->size() == patches.patches.size(), "mode_select: weight/patch count mismatch");
    const auto& p0 = patches.patches.front();
    return straight_through_select(g, f, patch_spans(patches), {p0.height, p0.width, p0.channels});
}

}  // namespace fovseg

// SPDX-License-Identifier: Apache-2.0

#include "fovseg/nn.hpp"

#include "fovseg/common.hpp"
#include "fovseg/kernels.hpp"

namespace fovseg {

void ForwardTrace::harvest_gradients() const {
    for (const auto& b : leaves) {
        if (!b.node->requires_grad) continue;
        kernels::accum(b.param->size(), b.node->grad.data(), b.param->grad.data());
    }
}

void ForwardTrace::apply_bn_updates(double momentum) const {
    for (const auto& u : bn_updates) {
        const std::size_t C = u.running_mean->size();
        const double M = static_cast<double>(u.stats.count);
        // Running variance uses the unbiased estimate when possible.
        const double var_scale = u.stats.count > 1 ? M / (M - 1.0) : 1.0;
        for (std::size_t c = 0; c < C; ++c) {
            u.running_mean->value[c] =
                (1.0 - momentum) * u.running_mean->value[c] + momentum * u.stats.mean[c];
            u.running_var->value[c] =
                (1.0 - momentum) * u.running_var->value[c] + momentum * var_scale * u.stats.var[c];
        }
    }
}

TensorPtr bind_param(Graph& g, Parameter& p, ForwardTrace* trace) {
    auto node = g.leaf(p.shape, p.value, p.trainable);
    if (trace) trace->leaves.push_back({node, &p});
    return node;
}

void register_conv(ParamSet& ps, const std::string& prefix, int k, int cin, int cout,
                   bool with_bias, std::uint64_t init_seed) {
    Parameter& w = ps.add(prefix + ".w", {k, k, cin, cout});
    RngStream rng = RngStream::derive(init_seed, w.name);
    he_init(w, k * k * cin, rng);
    if (with_bias) ps.add(prefix + ".b", {cout});  // zero-initialized
}

void register_bn(ParamSet& ps, const std::string& prefix, int channels) {
    Parameter& gamma = ps.add(prefix + ".gamma", {channels});
    std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
    ps.add(prefix + ".beta", {channels});
    ps.add(prefix + ".running_mean", {channels}, /*trainable=*/false);
    Parameter& rv = ps.add(prefix + ".running_var", {channels}, /*trainable=*/false);
    std::fill(rv.value.begin(), rv.value.end(), 1.0);
}

TensorPtr conv_block(Graph& g, const TensorPtr& x, ParamSet& ps, const std::string& prefix,
                     int stride, bool train, ForwardTrace* trace) {
    Parameter* w = ps.find(prefix + ".conv.w");
    Parameter* gamma = ps.find(prefix + ".bn.gamma");
    Parameter* beta = ps.find(prefix + ".bn.beta");
    Parameter* rm = ps.find(prefix + ".bn.running_mean");
    Parameter* rv = ps.find(prefix + ".bn.running_var");
    FOV_CONFIG_REQUIRE(w && gamma && beta && rm && rv, "conv_block: missing parameters for " + prefix);

    auto wn = bind_param(g, *w, trace);
    const int k = w->shape[0];
    auto y = conv2d(g, x, wn, nullptr, stride, (k - 1) / 2);

    auto gn = bind_param(g, *gamma, trace);
    auto bn = bind_param(g, *beta, trace);
    BnBatchStats stats;
    y = batchnorm(g, y, gn, bn, rm->value, rv->value, train, 1e-5, train ? &stats : nullptr);
    if (train && trace) trace->bn_updates.push_back({rm, rv, std::move(stats)});
    return relu(g, y);
}

TensorPtr conv_head(Graph& g, const TensorPtr& x, ParamSet& ps, const std::string& prefix,
                    ForwardTrace* trace) {
    Parameter* w = ps.find(prefix + ".w");
    Parameter* b = ps.find(prefix + ".b");
    FOV_CONFIG_REQUIRE(w && b, "conv_head: missing parameters for " + prefix);
    auto wn = bind_param(g, *w, trace);
    auto bnode = bind_param(g, *b, trace);
    const int k = w->shape[0];
    return conv2d(g, x, wn, bnode, 1, (k - 1) / 2);
}

}  // namespace fovseg

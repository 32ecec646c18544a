// SPDX-License-Identifier: Apache-2.0

#include "fovseg/segnet.hpp"

#include "fovseg/common.hpp"

namespace fovseg {

void SegConfig::validate() const {
    FOV_CONFIG_REQUIRE(in_channels >= 1, "SegConfig: channels must be >= 1");
    FOV_CONFIG_REQUIRE(!widths.empty(), "SegConfig: needs at least one level");
    for (int w : widths) FOV_CONFIG_REQUIRE(w >= 1, "SegConfig: widths must be positive");
    FOV_CONFIG_REQUIRE(classes >= 2, "SegConfig: needs at least two classes");
    FOV_CONFIG_REQUIRE(out_size >= 1, "SegConfig: out_size must be >= 1");
    const int down = 1 << (levels() - 1);
    FOV_CONFIG_REQUIRE(out_size % down == 0,
                       "SegConfig: out_size must be divisible by 2^(levels-1)");
}

SegNet::SegNet(SegConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    register_conv(params_, "seg.enc0.conv", 3, cfg_.in_channels, cfg_.widths[0], false, init_seed);
    register_bn(params_, "seg.enc0.bn", cfg_.widths[0]);
    for (int l = 1; l < cfg_.levels(); ++l) {
        const std::string prefix = "seg.down" + std::to_string(l);
        register_conv(params_, prefix + ".conv", 3, cfg_.widths[l - 1], cfg_.widths[l], false,
                      init_seed);
        register_bn(params_, prefix + ".bn", cfg_.widths[l]);
    }
    for (int l = cfg_.levels() - 1; l >= 1; --l) {
        const std::string prefix = "seg.up" + std::to_string(l);
        register_conv(params_, prefix + ".conv", 3, cfg_.widths[l] + cfg_.widths[l - 1],
                      cfg_.widths[l - 1], false, init_seed);
        register_bn(params_, prefix + ".bn", cfg_.widths[l - 1]);
    }
    register_conv(params_, "seg.head", 1, cfg_.widths[0], cfg_.classes, true, init_seed);
}

TensorPtr SegNet::forward(Graph& g, const TensorPtr& patch, bool train, ForwardTrace* trace) {
    FOV_CONFIG_REQUIRE(patch->shape.size() == 3 && patch->dim(2) == cfg_.in_channels,
                       "SegNet: input channel mismatch");
    FOV_CONFIG_REQUIRE(patch->dim(0) == cfg_.out_size && patch->dim(1) == cfg_.out_size,
                       "SegNet: input spatial size mismatch");

    std::vector<TensorPtr> skips;
    TensorPtr x = conv_block(g, patch, params_, "seg.enc0", 1, train, trace);
    skips.push_back(x);
    for (int l = 1; l < cfg_.levels(); ++l) {
        x = conv_block(g, x, params_, "seg.down" + std::to_string(l), 2, train, trace);
        if (l + 1 < cfg_.levels()) skips.push_back(x);
    }
    for (int l = cfg_.levels() - 1; l >= 1; --l) {
        x = bilinear_up2(g, x);
        x = concat_channels(g, x, skips[static_cast<std::size_t>(l - 1)]);
        x = conv_block(g, x, params_, "seg.up" + std::to_string(l), 1, train, trace);
    }
    return conv_head(g, x, params_, "seg.head", trace);
}

std::vector<double> SegNet::logits(const ImageTensor& patch) {
    Graph g;
    auto in = g.constant({patch.height, patch.width, patch.channels}, patch.values);
    return forward(g, in, /*train=*/false, nullptr)->value;
}

std::vector<Parameter*> SegNet::trainable_params() {
    std::vector<Parameter*> out;
    for (auto& p : params_.items())
        if (p->trainable) out.push_back(p.get());
    return out;
}

}  // namespace fovseg

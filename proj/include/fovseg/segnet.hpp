// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale segmentation network: a U-shaped encoder-decoder with stride-2
// downsampling convs, bilinear x2 upsampling and skip connections. Maps an
// S x S x C patch to S x S x K class logits.

#pragma once

#include "fovseg/image.hpp"
#include "fovseg/nn.hpp"

namespace fovseg {

struct SegConfig {
    int in_channels = 1;
    std::vector<int> widths = {16, 32, 64};  // one entry per resolution level
    int classes = 2;
    int out_size = 16;  // S; input spatial side must be divisible by 2^(levels-1)

    int levels() const { return static_cast<int>(widths.size()); }
    void validate() const;
};

class SegNet {
public:
    SegNet(SegConfig cfg, std::uint64_t init_seed);

    // patch leaf [S,S,C] -> logits [S,S,K].
    TensorPtr forward(Graph& g, const TensorPtr& patch, bool train, ForwardTrace* trace);

    // Eval-mode forward for inference; returns logits values.
    std::vector<double> logits(const ImageTensor& patch);

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    std::vector<Parameter*> trainable_params();
    const SegConfig& config() const { return cfg_; }

private:
    SegConfig cfg_;
    ParamSet params_;
};

}  // namespace fovseg

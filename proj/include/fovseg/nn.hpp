// SPDX-License-Identifier: Apache-2.0
//
// Glue between long-lived Parameters and per-step Graphs. Each forward binds
// parameter values into fresh leaves (private gradients, so concurrent graphs
// never race) and records pending BatchNorm running-moment updates; the
// trainer harvests both at a serial synchronization point.

#pragma once

#include <string>
#include <vector>

#include "fovseg/optim.hpp"
#include "fovseg/tensor.hpp"

namespace fovseg {

struct BoundLeaf {
    TensorPtr node;
    Parameter* param;
};

struct BnPending {
    Parameter* running_mean;
    Parameter* running_var;
    BnBatchStats stats;
};

struct ForwardTrace {
    std::vector<BoundLeaf> leaves;
    std::vector<BnPending> bn_updates;

    // Adds every leaf gradient into its parameter's gradient accumulator.
    void harvest_gradients() const;
    // Momentum update of running moments from the recorded batch statistics.
    void apply_bn_updates(double momentum = 0.1) const;
};

// Leaf bound to a parameter; records the binding when trace is non-null.
TensorPtr bind_param(Graph& g, Parameter& p, ForwardTrace* trace);

// Parameter registration for the standard blocks. Conv weights are [k,k,Cin,Cout],
// He-initialized (fan-in) from a stream derived per parameter name.
void register_conv(ParamSet& ps, const std::string& prefix, int k, int cin, int cout,
                   bool with_bias, std::uint64_t init_seed);
void register_bn(ParamSet& ps, const std::string& prefix, int channels);

// conv(3x3 or 1x1) -> BN -> ReLU block using parameters registered under prefix.
TensorPtr conv_block(Graph& g, const TensorPtr& x, ParamSet& ps, const std::string& prefix,
                     int stride, bool train, ForwardTrace* trace);
// Bare conv with bias (network head).
TensorPtr conv_head(Graph& g, const TensorPtr& x, ParamSet& ps, const std::string& prefix,
                    ForwardTrace* trace);

}  // namespace fovseg

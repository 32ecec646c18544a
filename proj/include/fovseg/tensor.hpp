// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode tensor engine. A Graph is a tape of nodes in creation
// order; creation order is topological order, so backward is a single reverse
// sweep. Tensors are HWC row-major; a leading batch dimension is allowed
// where an op documents it. Everything is double precision.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace fovseg {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // same size as value whenever requires_grad
    bool requires_grad = false;

    std::vector<TensorPtr> parents;
    std::function<void()> backward_fn;  // accumulates into parents' grads
    long node_id = -1;

    std::size_t size() const { return value.size(); }
    int dim(std::size_t i) const { return shape[i]; }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class Graph {
public:
    // Fresh node; grad is allocated and zeroed when requires_grad.
    TensorPtr make(std::vector<int> shape, bool requires_grad);
    // Non-differentiable node with given contents.
    TensorPtr constant(std::vector<int> shape, std::vector<double> values);
    // Leaf with contents copied from `values`; the usual way parameters
    // enter a graph.
    TensorPtr leaf(std::vector<int> shape, std::span<const double> values, bool requires_grad);

    // Reverse sweep from a scalar root, seeded with 1.
    void backward(const TensorPtr& root);
    // Reverse sweep from an arbitrary node with an explicit output gradient.
    void backward_seeded(const TensorPtr& root, std::span<const double> seed);

    std::size_t node_count() const { return tape_.size(); }
    void clear() { tape_.clear(); }

private:
    std::vector<TensorPtr> tape_;
};

inline std::size_t numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

// ---- operators -----------------------------------------------------------

// Cross-correlation of [H,W,Cin] with [k,k,Cin,Cout] (+ optional [Cout] bias).
// k odd; output is [H',W',Cout] with H' = (H + 2*padding - k)/stride + 1.
TensorPtr conv2d(Graph& g, const TensorPtr& input, const TensorPtr& weight,
                 const TensorPtr& bias, int stride, int padding);

// Per-channel batch normalization over all leading dims of [..., C].
// Train mode normalizes with batch statistics and reports them via stats_out
// (the caller owns the running-moment update); eval mode normalizes with the
// provided running moments.
struct BnBatchStats {
    std::vector<double> mean;
    std::vector<double> var;  // biased (1/M)
    std::size_t count = 0;    // M = elements per channel
};
TensorPtr batchnorm(Graph& g, const TensorPtr& input, const TensorPtr& gamma,
                    const TensorPtr& beta, std::span<const double> running_mean,
                    std::span<const double> running_var, bool train,
                    double eps = 1e-5, BnBatchStats* stats_out = nullptr);

TensorPtr relu(Graph& g, const TensorPtr& x);

// Softmax over the trailing (channel) dimension of [..., K].
TensorPtr softmax_channel(Graph& g, const TensorPtr& x);

// Mean negative log-likelihood over pixels whose label is not ignore_value.
// labels are row-major over the leading dims of logits [..., K].
// All pixels ignored => loss 0 with zero gradient and all_ignored set.
struct CrossEntropyResult {
    TensorPtr loss;  // scalar, shape {1}
    long valid_pixels = 0;
    bool all_ignored() const { return valid_pixels == 0; }
};
CrossEntropyResult cross_entropy(Graph& g, const TensorPtr& logits,
                                 std::span<const int> labels, int ignore_value);

// Bilinear x2 upsample of [H,W,C] -> [2H,2W,C] (half-pixel-centre mapping).
TensorPtr bilinear_up2(Graph& g, const TensorPtr& x);

// Channel concatenation of [H,W,Ca] and [H,W,Cb] -> [H,W,Ca+Cb].
TensorPtr concat_channels(Graph& g, const TensorPtr& a, const TensorPtr& b);

// Slice dist[row, col, :] from [h,w,D] -> [D]; backward scatters.
TensorPtr gather_location(Graph& g, const TensorPtr& dist, int row, int col);

// log(max(x, exp(floor))) elementwise; entries whose log would fall below
// `floor` get clamped value and zero gradient.
TensorPtr clamped_log(Graph& g, const TensorPtr& x, double floor_log = -30.0);

// x + c (c constant), a * x, elementwise.
TensorPtr add_constant(Graph& g, const TensorPtr& x, std::span<const double> c);
TensorPtr scale_by(Graph& g, const TensorPtr& x, double a);

// Softmax over the whole (1-D) tensor.
TensorPtr softmax_vec(Graph& g, const TensorPtr& x);

// Sum of all entries -> scalar.
TensorPtr sum_all(Graph& g, const TensorPtr& x);

// Dot product with a constant weight vector -> scalar.
TensorPtr weighted_sum(Graph& g, const TensorPtr& x, std::span<const double> weights);

// weights [D] against D equally-shaped patches: out = sum_d w_d * patch_d.
// Exact-zero weights are skipped in the forward accumulation, so a one-hot
// weight vector reproduces the selected patch bitwise.
TensorPtr weighted_blend(Graph& g, const TensorPtr& weights,
                         const std::vector<std::span<const double>>& patches,
                         std::vector<int> patch_shape);

// Hard selection of patches[argmax probs] (ties -> lowest index) with the
// straight-through backward: the output gradient reaches every probs entry
// through the corresponding patch, as if the one-hot were an identity map.
TensorPtr straight_through_select(Graph& g, const TensorPtr& probs,
                                  const std::vector<std::span<const double>>& patches,
                                  std::vector<int> patch_shape);

// Index of the largest entry, lowest index on ties.
std::size_t argmax_index(std::span<const double> v);

}  // namespace fovseg

// SPDX-License-Identifier: Apache-2.0

#include "fovseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fovseg/common.hpp"
#include "fovseg/kernels.hpp"

namespace fovseg {

namespace k = kernels;

TensorPtr Graph::make(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->value.assign(numel(t->shape), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(t->value.size(), 0.0);
    t->node_id = static_cast<long>(tape_.size());
    tape_.push_back(t);
    return t;
}

TensorPtr Graph::constant(std::vector<int> shape, std::vector<double> values) {
    FOV_REQUIRE(numel(shape) == values.size(), "constant: shape/value size mismatch");
    auto t = make(std::move(shape), false);
    t->value = std::move(values);
    return t;
}

TensorPtr Graph::leaf(std::vector<int> shape, std::span<const double> values, bool requires_grad) {
    FOV_REQUIRE(numel(shape) == values.size(), "leaf: shape/value size mismatch");
    auto t = make(std::move(shape), requires_grad);
    std::copy(values.begin(), values.end(), t->value.begin());
    return t;
}

void Graph::backward(const TensorPtr& root) {
    FOV_REQUIRE(root->size() == 1, "backward: root must be scalar");
    const double one = 1.0;
    backward_seeded(root, std::span<const double>(&one, 1));
}

void Graph::backward_seeded(const TensorPtr& root, std::span<const double> seed) {
    FOV_REQUIRE(root->requires_grad, "backward: root does not require grad");
    FOV_REQUIRE(seed.size() == root->size(), "backward: seed shape mismatch");
    std::copy(seed.begin(), seed.end(), root->grad.begin());
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        Tensor* t = it->get();
        if (t->node_id > root->node_id) continue;
        if (t->requires_grad && t->backward_fn) t->backward_fn();
    }
}

std::size_t argmax_index(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

static bool any_requires(const std::initializer_list<TensorPtr>& ts) {
    for (const auto& t : ts)
        if (t && t->requires_grad) return true;
    return false;
}

// ---- conv2d ---------------------------------------------------------------

TensorPtr conv2d(Graph& g, const TensorPtr& input, const TensorPtr& weight,
                 const TensorPtr& bias, int stride, int padding) {
    FOV_REQUIRE(input->shape.size() == 3, "conv2d: input must be [H,W,Cin]");
    FOV_REQUIRE(weight->shape.size() == 4, "conv2d: weight must be [k,k,Cin,Cout]");
    const int H = input->dim(0), W = input->dim(1), Cin = input->dim(2);
    const int kh = weight->dim(0), kw = weight->dim(1);
    const int Cout = weight->dim(3);
    FOV_REQUIRE(kh == kw && kh % 2 == 1, "conv2d: kernel must be square with odd side");
    FOV_REQUIRE(weight->dim(2) == Cin, "conv2d: weight Cin mismatch");
    FOV_REQUIRE(stride >= 1 && padding >= 0, "conv2d: bad stride/padding");
    if (bias) FOV_REQUIRE(bias->size() == static_cast<std::size_t>(Cout), "conv2d: bias size mismatch");
    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;
    FOV_REQUIRE(Ho >= 1 && Wo >= 1, "conv2d: empty output");

    auto out = g.make({Ho, Wo, Cout}, any_requires({input, weight, bias}));
    const double* in = input->value.data();
    const double* w = weight->value.data();
    double* o = out->value.data();

    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            double* op = o + (static_cast<std::size_t>(oy) * Wo + ox) * Cout;
            if (bias) std::memcpy(op, bias->value.data(), sizeof(double) * Cout);
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * stride - padding + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride - padding + kx;
                    if (ix < 0 || ix >= W) continue;
                    const double* ip = in + (static_cast<std::size_t>(iy) * W + ix) * Cin;
                    const double* wp = w + ((static_cast<std::size_t>(ky) * kw + kx) * Cin) * Cout;
                    for (int ci = 0; ci < Cin; ++ci)
                        k::axpy(static_cast<std::size_t>(Cout), ip[ci], wp + static_cast<std::size_t>(ci) * Cout, op);
                }
            }
        }
    }

    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {input, weight};
        if (bias) out->parents.push_back(bias);
        TensorPtr in_t = input, w_t = weight, b_t = bias;
        const int s = stride, p = padding;
        out->backward_fn = [self, in_t, w_t, b_t, s, p, H, W, Cin, kh, kw, Cout, Ho, Wo]() {
            const double* go = self->grad.data();
            const double* in = in_t->value.data();
            const double* w = w_t->value.data();
            const bool need_in = in_t->requires_grad;
            const bool need_w = w_t->requires_grad;
            const bool need_b = b_t && b_t->requires_grad;
            for (int oy = 0; oy < Ho; ++oy) {
                for (int ox = 0; ox < Wo; ++ox) {
                    const double* gp = go + (static_cast<std::size_t>(oy) * Wo + ox) * Cout;
                    if (need_b) k::accum(static_cast<std::size_t>(Cout), gp, b_t->grad.data());
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * s - p + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * s - p + kx;
                            if (ix < 0 || ix >= W) continue;
                            const std::size_t in_base = (static_cast<std::size_t>(iy) * W + ix) * Cin;
                            const std::size_t w_base = (static_cast<std::size_t>(ky) * kw + kx) * Cin * Cout;
                            for (int ci = 0; ci < Cin; ++ci) {
                                if (need_w)
                                    k::axpy(static_cast<std::size_t>(Cout), in[in_base + ci], gp,
                                            w_t->grad.data() + w_base + static_cast<std::size_t>(ci) * Cout);
                                if (need_in)
                                    in_t->grad[in_base + ci] +=
                                        k::dot(static_cast<std::size_t>(Cout), gp, w + w_base + static_cast<std::size_t>(ci) * Cout);
                            }
                        }
                    }
                }
            }
        };
    }
    return out;
}

// ---- batchnorm --------------------------------------------------------------

TensorPtr batchnorm(Graph& g, const TensorPtr& input, const TensorPtr& gamma,
                    const TensorPtr& beta, std::span<const double> running_mean,
                    std::span<const double> running_var, bool train, double eps,
                    BnBatchStats* stats_out) {
    FOV_REQUIRE(!input->shape.empty(), "batchnorm: scalar input");
    const int C = input->shape.back();
    FOV_REQUIRE(gamma->size() == static_cast<std::size_t>(C) && beta->size() == static_cast<std::size_t>(C),
                "batchnorm: gamma/beta channel mismatch");
    const std::size_t n = input->size();
    const std::size_t M = n / static_cast<std::size_t>(C);

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (train) {
        const double* x = input->value.data();
        for (std::size_t i = 0; i < M; ++i)
            k::accum(static_cast<std::size_t>(C), x + i * C, mean.data());
        for (int c = 0; c < C; ++c) mean[c] /= static_cast<double>(M);
        for (std::size_t i = 0; i < M; ++i)
            for (int c = 0; c < C; ++c) {
                const double d = x[i * C + c] - mean[c];
                var[c] += d * d;
            }
        for (int c = 0; c < C; ++c) var[c] /= static_cast<double>(M);
        if (stats_out) {
            stats_out->mean = mean;
            stats_out->var = var;
            stats_out->count = M;
        }
    } else {
        FOV_REQUIRE(running_mean.size() == static_cast<std::size_t>(C) &&
                        running_var.size() == static_cast<std::size_t>(C),
                    "batchnorm: running stats channel mismatch");
        mean.assign(running_mean.begin(), running_mean.end());
        var.assign(running_var.begin(), running_var.end());
    }

    std::vector<double> inv_std(C);
    for (int c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

    auto out = g.make(input->shape, any_requires({input, gamma, beta}));
    auto xhat = std::make_shared<std::vector<double>>(n);
    {
        const double* x = input->value.data();
        const double* gm = gamma->value.data();
        const double* bt = beta->value.data();
        double* o = out->value.data();
        double* xh = xhat->data();
        for (std::size_t i = 0; i < M; ++i)
            for (int c = 0; c < C; ++c) {
                const std::size_t idx = i * C + c;
                xh[idx] = (x[idx] - mean[c]) * inv_std[c];
                o[idx] = gm[c] * xh[idx] + bt[c];
            }
    }

    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {input, gamma, beta};
        TensorPtr in_t = input, g_t = gamma, b_t = beta;
        auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
        out->backward_fn = [self, in_t, g_t, b_t, xhat, istd, C, M, train]() {
            const double* go = self->grad.data();
            const double* xh = xhat->data();
            std::vector<double> sg(C, 0.0), sgx(C, 0.0);
            for (std::size_t i = 0; i < M; ++i)
                for (int c = 0; c < C; ++c) {
                    const std::size_t idx = i * C + c;
                    sg[c] += go[idx];
                    sgx[c] += go[idx] * xh[idx];
                }
            if (g_t->requires_grad) k::accum(static_cast<std::size_t>(C), sgx.data(), g_t->grad.data());
            if (b_t->requires_grad) k::accum(static_cast<std::size_t>(C), sg.data(), b_t->grad.data());
            if (in_t->requires_grad) {
                const double* gm = g_t->value.data();
                const double invM = 1.0 / static_cast<double>(M);
                for (std::size_t i = 0; i < M; ++i)
                    for (int c = 0; c < C; ++c) {
                        const std::size_t idx = i * C + c;
                        double d = go[idx];
                        if (train) d -= invM * (sg[c] + xh[idx] * sgx[c]);
                        in_t->grad[idx] += gm[c] * (*istd)[c] * d;
                    }
            }
        };
    }
    return out;
}

// ---- relu -------------------------------------------------------------------

TensorPtr relu(Graph& g, const TensorPtr& x) {
    auto out = g.make(x->shape, x->requires_grad);
    k::relu_fwd(x->size(), x->value.data(), out->value.data());
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        out->backward_fn = [self, x_t]() {
            k::relu_bwd(x_t->size(), x_t->value.data(), self->grad.data(), x_t->grad.data());
        };
    }
    return out;
}

// ---- softmax over trailing dim ---------------------------------------------

static void softmax_rows(const double* x, double* y, std::size_t rows, int K) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xi = x + i * K;
        double* yi = y + i * K;
        double m = xi[0];
        for (int j = 1; j < K; ++j) m = std::max(m, xi[j]);
        double s = 0.0;
        for (int j = 0; j < K; ++j) {
            yi[j] = std::exp(xi[j] - m);
            s += yi[j];
        }
        const double inv = 1.0 / s;
        for (int j = 0; j < K; ++j) yi[j] *= inv;
    }
}

static void softmax_rows_backward(const double* y, const double* go, double* gx,
                                  std::size_t rows, int K) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* yi = y + i * K;
        const double* gi = go + i * K;
        double dotgy = 0.0;
        for (int j = 0; j < K; ++j) dotgy += gi[j] * yi[j];
        for (int j = 0; j < K; ++j) gx[i * K + j] += yi[j] * (gi[j] - dotgy);
    }
}

TensorPtr softmax_channel(Graph& g, const TensorPtr& x) {
    FOV_REQUIRE(!x->shape.empty(), "softmax_channel: scalar input");
    const int K = x->shape.back();
    const std::size_t rows = x->size() / static_cast<std::size_t>(K);
    auto out = g.make(x->shape, x->requires_grad);
    softmax_rows(x->value.data(), out->value.data(), rows, K);
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        out->backward_fn = [self, x_t, rows, K]() {
            softmax_rows_backward(self->value.data(), self->grad.data(), x_t->grad.data(), rows, K);
        };
    }
    return out;
}

TensorPtr softmax_vec(Graph& g, const TensorPtr& x) {
    FOV_REQUIRE(x->shape.size() == 1, "softmax_vec: expects 1-D tensor");
    return softmax_channel(g, x);
}

// ---- cross entropy -----------------------------------------------------------

CrossEntropyResult cross_entropy(Graph& g, const TensorPtr& logits,
                                 std::span<const int> labels, int ignore_value) {
    FOV_REQUIRE(!logits->shape.empty(), "cross_entropy: scalar logits");
    const int K = logits->shape.back();
    const std::size_t P = logits->size() / static_cast<std::size_t>(K);
    FOV_REQUIRE(labels.size() == P, "cross_entropy: label count mismatch");

    long valid = 0;
    double total = 0.0;
    auto probs = std::make_shared<std::vector<double>>(P * static_cast<std::size_t>(K));
    softmax_rows(logits->value.data(), probs->data(), P, K);
    const double* z = logits->value.data();
    for (std::size_t i = 0; i < P; ++i) {
        const int lab = labels[i];
        if (lab == ignore_value) continue;
        FOV_REQUIRE(lab >= 0 && lab < K, "cross_entropy: label out of range");
        const double* zi = z + i * K;
        double m = zi[0];
        for (int j = 1; j < K; ++j) m = std::max(m, zi[j]);
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += std::exp(zi[j] - m);
        total += (m + std::log(s)) - zi[lab];
        ++valid;
    }

    auto loss = g.make({1}, logits->requires_grad);
    loss->value[0] = valid > 0 ? total / static_cast<double>(valid) : 0.0;

    if (loss->requires_grad && valid > 0) {
        Tensor* self = loss.get();
        loss->parents = {logits};
        TensorPtr z_t = logits;
        std::vector<int> labs(labels.begin(), labels.end());
        const double invV = 1.0 / static_cast<double>(valid);
        loss->backward_fn = [self, z_t, probs, labs = std::move(labs), ignore_value, invV, P, K]() {
            const double go = self->grad[0];
            for (std::size_t i = 0; i < P; ++i) {
                if (labs[i] == ignore_value) continue;
                const double* pi = probs->data() + i * K;
                double* gi = z_t->grad.data() + i * K;
                for (int j = 0; j < K; ++j) gi[j] += go * invV * pi[j];
                gi[labs[i]] -= go * invV;
            }
        };
    }
    return {loss, valid};
}

// ---- bilinear x2 upsample -----------------------------------------------------

TensorPtr bilinear_up2(Graph& g, const TensorPtr& x) {
    FOV_REQUIRE(x->shape.size() == 3, "bilinear_up2: input must be [H,W,C]");
    const int H = x->dim(0), W = x->dim(1), C = x->dim(2);
    const int Ho = 2 * H, Wo = 2 * W;
    auto out = g.make({Ho, Wo, C}, x->requires_grad);

    // Per-axis taps under the half-pixel-centre mapping src = (i+0.5)/2 - 0.5.
    auto taps = [](int n_out, int n_in) {
        std::vector<std::array<int, 2>> idx(n_out);
        std::vector<double> w1(n_out);
        for (int i = 0; i < n_out; ++i) {
            const double src = (i + 0.5) / 2.0 - 0.5;
            int lo = static_cast<int>(std::floor(src));
            const double f = src - lo;
            int hi = lo + 1;
            lo = std::clamp(lo, 0, n_in - 1);
            hi = std::clamp(hi, 0, n_in - 1);
            idx[i] = {lo, hi};
            w1[i] = f;
        }
        return std::pair(idx, w1);
    };
    auto [yi, yf] = taps(Ho, H);
    auto [xi, xf] = taps(Wo, W);

    const double* in = x->value.data();
    double* o = out->value.data();
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            const double w00 = (1 - yf[oy]) * (1 - xf[ox]);
            const double w01 = (1 - yf[oy]) * xf[ox];
            const double w10 = yf[oy] * (1 - xf[ox]);
            const double w11 = yf[oy] * xf[ox];
            double* op = o + (static_cast<std::size_t>(oy) * Wo + ox) * C;
            const double* p00 = in + (static_cast<std::size_t>(yi[oy][0]) * W + xi[ox][0]) * C;
            const double* p01 = in + (static_cast<std::size_t>(yi[oy][0]) * W + xi[ox][1]) * C;
            const double* p10 = in + (static_cast<std::size_t>(yi[oy][1]) * W + xi[ox][0]) * C;
            const double* p11 = in + (static_cast<std::size_t>(yi[oy][1]) * W + xi[ox][1]) * C;
            for (int c = 0; c < C; ++c)
                op[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
        }
    }

    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        auto yi_s = std::make_shared<decltype(yi)>(std::move(yi));
        auto yf_s = std::make_shared<decltype(yf)>(std::move(yf));
        auto xi_s = std::make_shared<decltype(xi)>(std::move(xi));
        auto xf_s = std::make_shared<decltype(xf)>(std::move(xf));
        out->backward_fn = [self, x_t, yi_s, yf_s, xi_s, xf_s, H, W, C, Ho, Wo]() {
            const double* go = self->grad.data();
            double* gx = x_t->grad.data();
            for (int oy = 0; oy < Ho; ++oy) {
                for (int ox = 0; ox < Wo; ++ox) {
                    const double fy = (*yf_s)[oy], fx = (*xf_s)[ox];
                    const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
                    const double w10 = fy * (1 - fx), w11 = fy * fx;
                    const double* gp = go + (static_cast<std::size_t>(oy) * Wo + ox) * C;
                    double* g00 = gx + (static_cast<std::size_t>((*yi_s)[oy][0]) * W + (*xi_s)[ox][0]) * C;
                    double* g01 = gx + (static_cast<std::size_t>((*yi_s)[oy][0]) * W + (*xi_s)[ox][1]) * C;
                    double* g10 = gx + (static_cast<std::size_t>((*yi_s)[oy][1]) * W + (*xi_s)[ox][0]) * C;
                    double* g11 = gx + (static_cast<std::size_t>((*yi_s)[oy][1]) * W + (*xi_s)[ox][1]) * C;
                    for (int c = 0; c < C; ++c) {
                        g00[c] += w00 * gp[c];
                        g01[c] += w01 * gp[c];
                        g10[c] += w10 * gp[c];
                        g11[c] += w11 * gp[c];
                    }
                }
            }
        };
    }
    return out;
}

// ---- concat -------------------------------------------------------------------

TensorPtr concat_channels(Graph& g, const TensorPtr& a, const TensorPtr& b) {
    FOV_REQUIRE(a->shape.size() == 3 && b->shape.size() == 3, "concat_channels: inputs must be [H,W,C]");
    FOV_REQUIRE(a->dim(0) == b->dim(0) && a->dim(1) == b->dim(1),
                "concat_channels: spatial dims mismatch");
    const int H = a->dim(0), W = a->dim(1), Ca = a->dim(2), Cb = b->dim(2);
    auto out = g.make({H, W, Ca + Cb}, any_requires({a, b}));
    const std::size_t pixels = static_cast<std::size_t>(H) * W;
    for (std::size_t i = 0; i < pixels; ++i) {
        std::memcpy(out->value.data() + i * (Ca + Cb), a->value.data() + i * Ca, sizeof(double) * Ca);
        std::memcpy(out->value.data() + i * (Ca + Cb) + Ca, b->value.data() + i * Cb, sizeof(double) * Cb);
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {a, b};
        TensorPtr a_t = a, b_t = b;
        out->backward_fn = [self, a_t, b_t, pixels, Ca, Cb]() {
            for (std::size_t i = 0; i < pixels; ++i) {
                const double* gp = self->grad.data() + i * (Ca + Cb);
                if (a_t->requires_grad)
                    k::accum(static_cast<std::size_t>(Ca), gp, a_t->grad.data() + i * Ca);
                if (b_t->requires_grad)
                    k::accum(static_cast<std::size_t>(Cb), gp + Ca, b_t->grad.data() + i * Cb);
            }
        };
    }
    return out;
}

// ---- gather / small vector ops -------------------------------------------------

TensorPtr gather_location(Graph& g, const TensorPtr& dist, int row, int col) {
    FOV_REQUIRE(dist->shape.size() == 3, "gather_location: dist must be [h,w,D]");
    const int h = dist->dim(0), w = dist->dim(1), D = dist->dim(2);
    FOV_REQUIRE(row >= 0 && row < h && col >= 0 && col < w, "gather_location: out of range");
    auto out = g.make({D}, dist->requires_grad);
    const std::size_t base = (static_cast<std::size_t>(row) * w + col) * D;
    std::copy_n(dist->value.data() + base, D, out->value.data());
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {dist};
        TensorPtr d_t = dist;
        out->backward_fn = [self, d_t, base, D]() {
            k::accum(static_cast<std::size_t>(D), self->grad.data(), d_t->grad.data() + base);
        };
    }
    return out;
}

TensorPtr clamped_log(Graph& g, const TensorPtr& x, double floor_log) {
    auto out = g.make(x->shape, x->requires_grad);
    const double xmin = std::exp(floor_log);
    for (std::size_t i = 0; i < x->size(); ++i)
        out->value[i] = x->value[i] > xmin ? std::log(x->value[i]) : floor_log;
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        out->backward_fn = [self, x_t, xmin]() {
            for (std::size_t i = 0; i < x_t->size(); ++i)
                if (x_t->value[i] > xmin) x_t->grad[i] += self->grad[i] / x_t->value[i];
        };
    }
    return out;
}

TensorPtr add_constant(Graph& g, const TensorPtr& x, std::span<const double> c) {
    FOV_REQUIRE(c.size() == x->size(), "add_constant: size mismatch");
    auto out = g.make(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->size(); ++i) out->value[i] = x->value[i] + c[i];
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        out->backward_fn = [self, x_t]() {
            k::accum(x_t->size(), self->grad.data(), x_t->grad.data());
        };
    }
    return out;
}

TensorPtr scale_by(Graph& g, const TensorPtr& x, double a) {
    auto out = g.make(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->size(); ++i) out->value[i] = a * x->value[i];
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        out->backward_fn = [self, x_t, a]() {
            k::axpy(x_t->size(), a, self->grad.data(), x_t->grad.data());
        };
    }
    return out;
}

TensorPtr sum_all(Graph& g, const TensorPtr& x) {
    auto out = g.make({1}, x->requires_grad);
    out->value[0] = k::sum(x->size(), x->value.data());
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        out->backward_fn = [self, x_t]() {
            const double go = self->grad[0];
            for (std::size_t i = 0; i < x_t->size(); ++i) x_t->grad[i] += go;
        };
    }
    return out;
}

TensorPtr weighted_sum(Graph& g, const TensorPtr& x, std::span<const double> weights) {
    FOV_REQUIRE(weights.size() == x->size(), "weighted_sum: size mismatch");
    auto out = g.make({1}, x->requires_grad);
    out->value[0] = k::dot(x->size(), x->value.data(), weights.data());
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {x};
        TensorPtr x_t = x;
        auto w = std::make_shared<std::vector<double>>(weights.begin(), weights.end());
        out->backward_fn = [self, x_t, w]() {
            k::axpy(x_t->size(), self->grad[0], w->data(), x_t->grad.data());
        };
    }
    return out;
}

// ---- patch blending -------------------------------------------------------------

static void check_blend_args(const TensorPtr& weights,
                             const std::vector<std::span<const double>>& patches,
                             const std::vector<int>& patch_shape) {
    FOV_REQUIRE(weights->shape.size() == 1, "blend: weights must be 1-D");
    FOV_REQUIRE(weights->size() == patches.size(), "blend: weight/patch count mismatch");
    FOV_REQUIRE(!patches.empty(), "blend: no patches");
    const std::size_t n = numel(patch_shape);
    for (const auto& p : patches) FOV_REQUIRE(p.size() == n, "blend: patch size mismatch");
}

TensorPtr weighted_blend(Graph& g, const TensorPtr& weights,
                         const std::vector<std::span<const double>>& patches,
                         std::vector<int> patch_shape) {
    check_blend_args(weights, patches, patch_shape);
    const std::size_t n = numel(patch_shape);
    auto out = g.make(std::move(patch_shape), weights->requires_grad);
    for (std::size_t d = 0; d < patches.size(); ++d) {
        const double wd = weights->value[d];
        if (wd == 0.0) continue;  // keeps one-hot blends bitwise equal to the patch
        k::axpy(n, wd, patches[d].data(), out->value.data());
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {weights};
        TensorPtr w_t = weights;
        auto pv = std::make_shared<std::vector<std::span<const double>>>(patches);
        out->backward_fn = [self, w_t, pv, n]() {
            for (std::size_t d = 0; d < pv->size(); ++d)
                w_t->grad[d] += k::dot(n, self->grad.data(), (*pv)[d].data());
        };
    }
    return out;
}

TensorPtr straight_through_select(Graph& g, const TensorPtr& probs,
                                  const std::vector<std::span<const double>>& patches,
                                  std::vector<int> patch_shape) {
    check_blend_args(probs, patches, patch_shape);
    const std::size_t n = numel(patch_shape);
    const std::size_t sel = argmax_index(probs->value);
    auto out = g.make(std::move(patch_shape), probs->requires_grad);
    std::copy_n(patches[sel].data(), n, out->value.data());
    if (out->requires_grad) {
        Tensor* self = out.get();
        out->parents = {probs};
        TensorPtr p_t = probs;
        auto pv = std::make_shared<std::vector<std::span<const double>>>(patches);
        out->backward_fn = [self, p_t, pv, n]() {
            for (std::size_t d = 0; d < pv->size(); ++d)
                p_t->grad[d] += k::dot(n, self->grad.data(), (*pv)[d].data());
        };
    }
    return out;
}

}  // namespace fovseg

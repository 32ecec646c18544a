// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels. These define the semantics; the SIMD variants are
// equivalence-tested against them.

#include "fovseg/kernels.hpp"

#include <cmath>

namespace fovseg::kernels::scalar {

void axpy(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void accum(std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scale(std::size_t n, double a, double* x) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double dot(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum(std::size_t n, const double* x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void relu_fwd(std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(std::size_t n, const double* x, const double* g, double* gx) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) gx[i] += g[i];
}

void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, double bias_corr1, double bias_corr2) {
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i] + weight_decay * p[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        const double mhat = m[i] * bias_corr1;
        const double vhat = v[i] * bias_corr2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

long first_nonfinite(std::size_t n, const double* x) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return static_cast<long>(i);
    return -1;
}

}  // namespace fovseg::kernels::scalar

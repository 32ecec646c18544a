// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers reach it only through the dispatch table after a
// runtime CPU check. Reductions use four independent lanes, so they are
// equivalent to the scalar reference up to summation order.

#include "fovseg/kernels.hpp"

#if defined(FOVSEG_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace fovseg::kernels::avx2 {

void axpy(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void accum(std::size_t n, const double* x, double* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += x[i];
}

void scale(std::size_t n, double a, double* x) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double r = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

double sum(std::size_t n, const double* x) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double r = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) r += x[i];
    return r;
}

void relu_fwd(std::size_t n, const double* x, double* y) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(std::size_t n, const double* x, const double* g, double* gx) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d gm = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), gm));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) gx[i] += g[i];
}

void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, double bias_corr1, double bias_corr2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vwd = _mm256_set1_pd(weight_decay);
    const __m256d vbc1 = _mm256_set1_pd(bias_corr1);
    const __m256d vbc2 = _mm256_set1_pd(bias_corr2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vp = _mm256_loadu_pd(p + i);
        const __m256d vg = _mm256_fmadd_pd(vwd, vp, _mm256_loadu_pd(g + i));
        __m256d vm = _mm256_fmadd_pd(v1mb1, vg, _mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)));
        __m256d vv = _mm256_fmadd_pd(v1mb2, _mm256_mul_pd(vg, vg),
                                     _mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(vm, vbc1);
        const __m256d vhat = _mm256_mul_pd(vv, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        vp = _mm256_sub_pd(vp, _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom));
        _mm256_storeu_pd(p + i, vp);
    }
    if (i < n)
        scalar::adam_update(n - i, p + i, g + i, m + i, v + i, lr, beta1, beta2, eps,
                            weight_decay, bias_corr1, bias_corr2);
}

long first_nonfinite(std::size_t n, const double* x) {
    // x - x == 0 exactly when x is finite (NaN and Inf both yield NaN).
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d d = _mm256_sub_pd(vx, vx);
        const __m256d ok = _mm256_cmp_pd(d, zero, _CMP_EQ_OQ);
        if (_mm256_movemask_pd(ok) != 0xF) {
            for (std::size_t j = i; j < i + 4; ++j)
                if (!std::isfinite(x[j])) return static_cast<long>(j);
        }
    }
    for (; i < n; ++i)
        if (!std::isfinite(x[i])) return static_cast<long>(i);
    return -1;
}

}  // namespace fovseg::kernels::avx2

#endif  // FOVSEG_HAVE_AVX2

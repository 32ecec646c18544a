// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner-loop kernels on double arrays. Every kernel exists as a
// scalar reference implementation and, on x86-64, an AVX2+FMA variant. A
// dispatch table of function pointers is filled once at startup (or explicitly
// via select()); higher layers only ever call through the table.

#pragma once

#include <cstddef>
#include <string>

namespace fovseg::kernels {

using axpy_fn  = void (*)(std::size_t n, double a, const double* x, double* y);
using accum_fn = void (*)(std::size_t n, const double* x, double* y);
using scale_fn = void (*)(std::size_t n, double a, double* x);
using dot_fn   = double (*)(std::size_t n, const double* x, const double* y);
using sum_fn   = double (*)(std::size_t n, const double* x);
using relu_fwd_fn = void (*)(std::size_t n, const double* x, double* y);
using relu_bwd_fn = void (*)(std::size_t n, const double* x, const double* g, double* gx);
using adam_fn  = void (*)(std::size_t n, double* p, const double* g, double* m, double* v,
                          double lr, double beta1, double beta2, double eps,
                          double weight_decay, double bias_corr1, double bias_corr2);
using nonfinite_fn = long (*)(std::size_t n, const double* x);

// Dispatch table, filled by select().
extern axpy_fn axpy;            // y[i] += a * x[i]
extern accum_fn accum;          // y[i] += x[i]
extern scale_fn scale;          // x[i] *= a
extern dot_fn dot;              // sum_i x[i] * y[i]
extern sum_fn sum;              // sum_i x[i]
extern relu_fwd_fn relu_fwd;    // y[i] = max(x[i], 0)
extern relu_bwd_fn relu_bwd;    // gx[i] += (x[i] > 0) * g[i]
extern adam_fn adam_update;     // in-place Adam step with L2 decay folded into g
extern nonfinite_fn first_nonfinite;  // index of first non-finite entry, -1 if none

// Scalar reference kernels, always available (equivalence-test anchor).
namespace scalar {
void axpy(std::size_t n, double a, const double* x, double* y);
void accum(std::size_t n, const double* x, double* y);
void scale(std::size_t n, double a, double* x);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
void relu_fwd(std::size_t n, const double* x, double* y);
void relu_bwd(std::size_t n, const double* x, const double* g, double* gx);
void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, double bias_corr1, double bias_corr2);
long first_nonfinite(std::size_t n, const double* x);
}  // namespace scalar

#if defined(FOVSEG_HAVE_AVX2)
namespace avx2 {
void axpy(std::size_t n, double a, const double* x, double* y);
void accum(std::size_t n, const double* x, double* y);
void scale(std::size_t n, double a, double* x);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
void relu_fwd(std::size_t n, const double* x, double* y);
void relu_bwd(std::size_t n, const double* x, const double* g, double* gx);
void adam_update(std::size_t n, double* p, const double* g, double* m, double* v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, double bias_corr1, double bias_corr2);
long first_nonfinite(std::size_t n, const double* x);
}  // namespace avx2
#endif

bool cpu_supports_avx2();

// name: "auto" picks the best supported variant, "scalar"/"avx2" force one.
// Honours the FOVSEG_KERNELS environment variable when name is "auto".
// Returns the name of the active variant.
std::string select(const std::string& name = "auto");

// Name of the currently active variant ("scalar" or "avx2").
std::string active();

}  // namespace fovseg::kernels

// SPDX-License-Identifier: Apache-2.0

#include "fovseg/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace fovseg::kernels {

axpy_fn axpy = scalar::axpy;
accum_fn accum = scalar::accum;
scale_fn scale = scalar::scale;
dot_fn dot = scalar::dot;
sum_fn sum = scalar::sum;
relu_fwd_fn relu_fwd = scalar::relu_fwd;
relu_bwd_fn relu_bwd = scalar::relu_bwd;
adam_fn adam_update = scalar::adam_update;
nonfinite_fn first_nonfinite = scalar::first_nonfinite;

namespace {
std::string g_active = "scalar";
}

bool cpu_supports_avx2() {
#if defined(FOVSEG_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

static void hook_scalar() {
    axpy = scalar::axpy;
    accum = scalar::accum;
    scale = scalar::scale;
    dot = scalar::dot;
    sum = scalar::sum;
    relu_fwd = scalar::relu_fwd;
    relu_bwd = scalar::relu_bwd;
    adam_update = scalar::adam_update;
    first_nonfinite = scalar::first_nonfinite;
    g_active = "scalar";
}

#if defined(FOVSEG_HAVE_AVX2)
static void hook_avx2() {
    axpy = avx2::axpy;
    accum = avx2::accum;
    scale = avx2::scale;
    dot = avx2::dot;
    sum = avx2::sum;
    relu_fwd = avx2::relu_fwd;
    relu_bwd = avx2::relu_bwd;
    adam_update = avx2::adam_update;
    first_nonfinite = avx2::first_nonfinite;
    g_active = "avx2";
}
#endif

std::string select(const std::string& name) {
    std::string want = name;
    if (want == "auto") {
        if (const char* env = std::getenv("FOVSEG_KERNELS")) want = env;
    }
    if (want == "scalar") {
        hook_scalar();
    } else if (want == "avx2") {
#if defined(FOVSEG_HAVE_AVX2)
        if (!cpu_supports_avx2())
            throw std::runtime_error("kernels: avx2 requested but not supported by this CPU");
        hook_avx2();
#else
        throw std::runtime_error("kernels: avx2 variant not compiled in");
#endif
    } else {  // auto
#if defined(FOVSEG_HAVE_AVX2)
        if (cpu_supports_avx2())
            hook_avx2();
        else
#endif
            hook_scalar();
    }
    return g_active;
}

std::string active() { return g_active; }

namespace {
// One-time default selection before main().
struct AutoSelect {
    AutoSelect() { select("auto"); }
} auto_select;
}  // namespace

}  // namespace fovseg::kernels

#pragma once

#include <cstddef>
#include <string>

// Low-level numeric kernels. Every entry point has a scalar reference
// implementation and, on x86-64, an AVX2 variant selected at runtime.
// The two variants are bit-exact equals by construction: the vector code
// performs the same operations in the same per-element order, no fma is
// used, and the project is compiled with -ffp-contract=off.

namespace medusa::kernels {

struct Conv2dShape {
    int n = 0;
    int c_in = 0;
    int h = 0;
    int w = 0;
    int c_out = 0;
    int k = 0;  // square kernel
    int stride = 1;
    int pad = 0;
    int out_h = 0;
    int out_w = 0;
};

struct KernelTable {
    const char* name;

    // out[i] = a[i] + b[i]
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = a[i] * b[i]
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = a[i] * s
    void (*scale)(const double* a, double s, double* out, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // dst[i] += a[i] * b[i]
    void (*mul_acc)(const double* a, const double* b, double* dst, std::size_t n);
    // out[i] = max(x[i], 0)
    void (*relu_fwd)(const double* x, double* out, std::size_t n);
    // gin[i] += x[i] > 0 ? gout[i] : 0
    void (*relu_bwd)(const double* x, const double* gout, double* gin, std::size_t n);

    void (*conv2d_fwd)(const Conv2dShape& s, const double* in, const double* w,
                       const double* bias, double* out);
    // accumulates into gin
    void (*conv2d_bwd_input)(const Conv2dShape& s, const double* gout,
                             const double* w, double* gin);
    // accumulates into gw / gb
    void (*conv2d_bwd_weight)(const Conv2dShape& s, const double* in,
                              const double* gout, double* gw, double* gb);

    // One bias-corrected Adam update over n contiguous scalars.
    void (*adam_update)(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bias_c1, double bias_c2);
};

enum class Backend { Scalar, Avx2 };

const KernelTable& scalar_table();
bool avx2_available();
const KernelTable* avx2_table();  // nullptr when unavailable

// Active table: AVX2 when available unless overridden via select() or the
// MEDUSA_KERNELS environment variable ("scalar" or "avx2").
const KernelTable& active();
bool select(Backend b);  // false if the backend is unavailable

}  // namespace medusa::kernels

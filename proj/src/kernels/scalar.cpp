#include "medusa/kernels.hpp"

#include <cmath>

// Reference kernels. The AVX2 variants mirror these loops element for
// element; keep accumulation order and expression shape in sync when
// editing either side.

namespace medusa::kernels {
namespace {

void add_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_s(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy_s(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void mul_acc_s(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = dst[i] + a[i] * b[i];
}

void relu_fwd_s(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_s(const double* x, const double* gout, double* gin, std::size_t n) {
    // unconditional add of a masked value, matching the vector code exactly
    // (including the +0.0 effect on signed zeros)
    for (std::size_t i = 0; i < n; ++i) gin[i] = gin[i] + (x[i] > 0.0 ? gout[i] : 0.0);
}

void conv2d_fwd_s(const Conv2dShape& s, const double* in, const double* w,
                  const double* bias, double* out) {
    const std::size_t hw = std::size_t(s.h) * s.w;
    const std::size_t ohw = std::size_t(s.out_h) * s.out_w;
    const int kk = s.k * s.k;
    for (int n = 0; n < s.n; ++n) {
        for (int co = 0; co < s.c_out; ++co) {
            const double b = bias ? bias[co] : 0.0;
            double* oplane = out + (std::size_t(n) * s.c_out + co) * ohw;
            for (int oy = 0; oy < s.out_h; ++oy) {
                const int iy0 = oy * s.stride - s.pad;
                for (int ox = 0; ox < s.out_w; ++ox) {
                    const int ix0 = ox * s.stride - s.pad;
                    double acc = b;
                    for (int ci = 0; ci < s.c_in; ++ci) {
                        const double* iplane = in + (std::size_t(n) * s.c_in + ci) * hw;
                        const double* wrow = w + (std::size_t(co) * s.c_in + ci) * kk;
                        for (int ky = 0; ky < s.k; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= s.h) continue;
                            const double* irow = iplane + std::size_t(iy) * s.w;
                            for (int kx = 0; kx < s.k; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= s.w) continue;
                                acc = acc + irow[ix] * wrow[ky * s.k + kx];
                            }
                        }
                    }
                    oplane[std::size_t(oy) * s.out_w + ox] = acc;
                }
            }
        }
    }
}

void conv2d_bwd_input_s(const Conv2dShape& s, const double* gout, const double* w,
                        double* gin) {
    const std::size_t hw = std::size_t(s.h) * s.w;
    const std::size_t ohw = std::size_t(s.out_h) * s.out_w;
    const int kk = s.k * s.k;
    for (int n = 0; n < s.n; ++n) {
        for (int ci = 0; ci < s.c_in; ++ci) {
            double* gplane = gin + (std::size_t(n) * s.c_in + ci) * hw;
            for (int iy = 0; iy < s.h; ++iy) {
                for (int ix = 0; ix < s.w; ++ix) {
                    double acc = 0.0;
                    for (int co = 0; co < s.c_out; ++co) {
                        const double* goplane = gout + (std::size_t(n) * s.c_out + co) * ohw;
                        const double* wrow = w + (std::size_t(co) * s.c_in + ci) * kk;
                        for (int ky = 0; ky < s.k; ++ky) {
                            const int ty = iy + s.pad - ky;
                            if (ty < 0 || ty % s.stride != 0) continue;
                            const int oy = ty / s.stride;
                            if (oy >= s.out_h) continue;
                            for (int kx = 0; kx < s.k; ++kx) {
                                const int tx = ix + s.pad - kx;
                                if (tx < 0 || tx % s.stride != 0) continue;
                                const int ox = tx / s.stride;
                                if (ox >= s.out_w) continue;
                                acc = acc + goplane[std::size_t(oy) * s.out_w + ox] * wrow[ky * s.k + kx];
                            }
                        }
                    }
                    gplane[std::size_t(iy) * s.w + ix] = gplane[std::size_t(iy) * s.w + ix] + acc;
                }
            }
        }
    }
}

void conv2d_bwd_weight_s(const Conv2dShape& s, const double* in, const double* gout,
                         double* gw, double* gb) {
    const std::size_t hw = std::size_t(s.h) * s.w;
    const std::size_t ohw = std::size_t(s.out_h) * s.out_w;
    const int kk = s.k * s.k;
    if (gb) {
        for (int co = 0; co < s.c_out; ++co) {
            double acc = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const double* goplane = gout + (std::size_t(n) * s.c_out + co) * ohw;
                for (std::size_t i = 0; i < ohw; ++i) acc = acc + goplane[i];
            }
            gb[co] = gb[co] + acc;
        }
    }
    for (int co = 0; co < s.c_out; ++co) {
        for (int ci = 0; ci < s.c_in; ++ci) {
            for (int ky = 0; ky < s.k; ++ky) {
                for (int kx = 0; kx < s.k; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < s.n; ++n) {
                        const double* goplane = gout + (std::size_t(n) * s.c_out + co) * ohw;
                        const double* iplane = in + (std::size_t(n) * s.c_in + ci) * hw;
                        for (int oy = 0; oy < s.out_h; ++oy) {
                            const int iy = oy * s.stride - s.pad + ky;
                            if (iy < 0 || iy >= s.h) continue;
                            for (int ox = 0; ox < s.out_w; ++ox) {
                                const int ix = ox * s.stride - s.pad + kx;
                                if (ix < 0 || ix >= s.w) continue;
                                acc = acc + goplane[std::size_t(oy) * s.out_w + ox] *
                                                iplane[std::size_t(iy) * s.w + ix];
                            }
                        }
                    }
                    gw[(std::size_t(co) * s.c_in + ci) * kk + ky * s.k + kx] += acc;
                }
            }
        }
    }
}

void adam_update_s(double* p, const double* g, double* m, double* v, std::size_t n,
                   double lr, double beta1, double beta2, double eps,
                   double bias_c1, double bias_c2) {
    const double omb1 = 1.0 - beta1;
    const double omb2 = 1.0 - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        m[i] = beta1 * m[i] + omb1 * gi;
        const double gg = gi * gi;
        v[i] = beta2 * v[i] + omb2 * gg;
        const double mhat = m[i] / bias_c1;
        const double vhat = v[i] / bias_c2;
        const double denom = std::sqrt(vhat) + eps;
        p[i] = p[i] - lr * (mhat / denom);
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t = {
        "scalar",
        add_s,
        mul_s,
        scale_s,
        axpy_s,
        mul_acc_s,
        relu_fwd_s,
        relu_bwd_s,
        conv2d_fwd_s,
        conv2d_bwd_input_s,
        conv2d_bwd_weight_s,
        adam_update_s,
    };
    return t;
}

}  // namespace medusa::kernels

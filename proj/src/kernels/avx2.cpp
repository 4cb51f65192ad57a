#include "medusa/kernels.hpp"

#if defined(__AVX2__) && defined(__x86_64__)

#include <immintrin.h>

#include <cmath>

// AVX2 variants of the reference kernels in scalar.cpp. Each vector lane
// performs the same operation sequence as the scalar loop for that element,
// so results are bit-identical (no fma, -ffp-contract=off). Reductions that
// would need lane-crossing accumulation (conv2d_bwd_weight) stay scalar.

namespace medusa::kernels {
namespace {

void add_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_v(const double* a, double s, double* out, std::size_t n) {
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
    }
    for (; i < n; ++i) out[i] = a[i] * s;
}

void axpy_v(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void mul_acc_v(const double* a, const double* b, double* dst, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_loadu_pd(dst + i);
        const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(dst + i, _mm256_add_pd(d, prod));
    }
    for (; i < n; ++i) dst[i] = dst[i] + a[i] * b[i];
}

void relu_fwd_v(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // maxpd returns the second operand on ties, giving +0.0 for x == -0.0
        // exactly like the scalar () ? : form
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_v(const double* x, const double* gout, double* gin, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d g = _mm256_and_pd(_mm256_loadu_pd(gout + i), mask);
        _mm256_storeu_pd(gin + i, _mm256_add_pd(_mm256_loadu_pd(gin + i), g));
    }
    for (; i < n; ++i) gin[i] = gin[i] + (x[i] > 0.0 ? gout[i] : 0.0);
}

// Scalar path for one forward output pixel; used for borders and stride > 1.
inline double conv_fwd_pixel(const Conv2dShape& s, const double* in, const double* w,
                             double bias, int n, int co, int oy, int ox) {
    const std::size_t hw = std::size_t(s.h) * s.w;
    const int kk = s.k * s.k;
    const int iy0 = oy * s.stride - s.pad;
    const int ix0 = ox * s.stride - s.pad;
    double acc = bias;
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
    return acc;
}

void conv2d_fwd_v(const Conv2dShape& s, const double* in, const double* w,
                  const double* bias, double* out) {
    if (s.stride != 1) {
        scalar_table().conv2d_fwd(s, in, w, bias, out);
        return;
    }
    const std::size_t hw = std::size_t(s.h) * s.w;
    const std::size_t ohw = std::size_t(s.out_h) * s.out_w;
    const int kk = s.k * s.k;
    // ox range whose full kernel window lies inside the image
    const int lo = std::min(s.out_w, std::max(0, s.pad));
    const int hi = std::max(lo, std::min(s.out_w, s.w - s.k + s.pad + 1));
    for (int n = 0; n < s.n; ++n) {
        for (int co = 0; co < s.c_out; ++co) {
            const double b = bias ? bias[co] : 0.0;
            const __m256d bv = _mm256_set1_pd(b);
            double* oplane = out + (std::size_t(n) * s.c_out + co) * ohw;
            for (int oy = 0; oy < s.out_h; ++oy) {
                const int iy0 = oy - s.pad;
                double* orow = oplane + std::size_t(oy) * s.out_w;
                int ox = 0;
                for (; ox < lo; ++ox) orow[ox] = conv_fwd_pixel(s, in, w, b, n, co, oy, ox);
                for (; ox + 4 <= hi; ox += 4) {
                    __m256d acc = bv;
                    const int ix0 = ox - s.pad;
                    for (int ci = 0; ci < s.c_in; ++ci) {
                        const double* iplane = in + (std::size_t(n) * s.c_in + ci) * hw;
                        const double* wrow = w + (std::size_t(co) * s.c_in + ci) * kk;
                        for (int ky = 0; ky < s.k; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= s.h) continue;
                            const double* irow = iplane + std::size_t(iy) * s.w;
                            for (int kx = 0; kx < s.k; ++kx) {
                                const __m256d wv = _mm256_set1_pd(wrow[ky * s.k + kx]);
                                const __m256d xv = _mm256_loadu_pd(irow + ix0 + kx);
                                acc = _mm256_add_pd(acc, _mm256_mul_pd(xv, wv));
                            }
                        }
                    }
                    _mm256_storeu_pd(orow + ox, acc);
                }
                for (; ox < s.out_w; ++ox) orow[ox] = conv_fwd_pixel(s, in, w, b, n, co, oy, ox);
            }
        }
    }
}

inline double conv_bwd_input_pixel(const Conv2dShape& s, const double* gout,
                                   const double* w, int n, int ci, int iy, int ix) {
    const std::size_t ohw = std::size_t(s.out_h) * s.out_w;
    const int kk = s.k * s.k;
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
    return acc;
}

void conv2d_bwd_input_v(const Conv2dShape& s, const double* gout, const double* w,
                        double* gin) {
    if (s.stride != 1) {
        scalar_table().conv2d_bwd_input(s, gout, w, gin);
        return;
    }
    const std::size_t hw = std::size_t(s.h) * s.w;
    const std::size_t ohw = std::size_t(s.out_h) * s.out_w;
    const int kk = s.k * s.k;
    // ix range where every kx maps to a valid ox
    const int lo = std::min(s.w, std::max(0, s.k - 1 - s.pad));
    const int hi = std::max(lo, std::min(s.w, s.out_w - s.pad));
    for (int n = 0; n < s.n; ++n) {
        for (int ci = 0; ci < s.c_in; ++ci) {
            double* gplane = gin + (std::size_t(n) * s.c_in + ci) * hw;
            for (int iy = 0; iy < s.h; ++iy) {
                double* grow = gplane + std::size_t(iy) * s.w;
                int ix = 0;
                for (; ix < lo; ++ix)
                    grow[ix] = grow[ix] + conv_bwd_input_pixel(s, gout, w, n, ci, iy, ix);
                for (; ix + 4 <= hi; ix += 4) {
                    __m256d acc = _mm256_setzero_pd();
                    for (int co = 0; co < s.c_out; ++co) {
                        const double* goplane = gout + (std::size_t(n) * s.c_out + co) * ohw;
                        const double* wrow = w + (std::size_t(co) * s.c_in + ci) * kk;
                        for (int ky = 0; ky < s.k; ++ky) {
                            const int oy = iy + s.pad - ky;
                            if (oy < 0 || oy >= s.out_h) continue;
                            const double* gorow = goplane + std::size_t(oy) * s.out_w;
                            for (int kx = 0; kx < s.k; ++kx) {
                                const __m256d wv = _mm256_set1_pd(wrow[ky * s.k + kx]);
                                const __m256d gv = _mm256_loadu_pd(gorow + ix + s.pad - kx);
                                acc = _mm256_add_pd(acc, _mm256_mul_pd(gv, wv));
                            }
                        }
                    }
                    _mm256_storeu_pd(grow + ix, _mm256_add_pd(_mm256_loadu_pd(grow + ix), acc));
                }
                for (; ix < s.w; ++ix)
                    grow[ix] = grow[ix] + conv_bwd_input_pixel(s, gout, w, n, ci, iy, ix);
            }
        }
    }
}

void adam_update_v(double* p, const double* g, double* m, double* v, std::size_t n,
                   double lr, double beta1, double beta2, double eps,
                   double bias_c1, double bias_c2) {
    const double omb1 = 1.0 - beta1;
    const double omb2 = 1.0 - beta2;
    const __m256d b1v = _mm256_set1_pd(beta1), omb1v = _mm256_set1_pd(omb1);
    const __m256d b2v = _mm256_set1_pd(beta2), omb2v = _mm256_set1_pd(omb2);
    const __m256d bc1v = _mm256_set1_pd(bias_c1), bc2v = _mm256_set1_pd(bias_c2);
    const __m256d epsv = _mm256_set1_pd(eps), lrv = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_add_pd(_mm256_mul_pd(b1v, mv), _mm256_mul_pd(omb1v, gv));
        const __m256d gg = _mm256_mul_pd(gv, gv);
        vv = _mm256_add_pd(_mm256_mul_pd(b2v, vv), _mm256_mul_pd(omb2v, gg));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_div_pd(mv, bc1v);
        const __m256d vhat = _mm256_div_pd(vv, bc2v);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        const __m256d pv = _mm256_loadu_pd(p + i);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(pv, _mm256_mul_pd(lrv, _mm256_div_pd(mhat, denom))));
    }
    for (; i < n; ++i) {
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

void conv2d_bwd_weight_v(const Conv2dShape& s, const double* in, const double* gout,
                         double* gw, double* gb) {
    scalar_table().conv2d_bwd_weight(s, in, gout, gw, gb);
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable t = {
        "avx2",
        add_v,
        mul_v,
        scale_v,
        axpy_v,
        mul_acc_v,
        relu_fwd_v,
        relu_bwd_v,
        conv2d_fwd_v,
        conv2d_bwd_input_v,
        conv2d_bwd_weight_v,
        adam_update_v,
    };
    return &t;
}

}  // namespace medusa::kernels

#else

namespace medusa::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace medusa::kernels

#endif

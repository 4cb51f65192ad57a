#include "medusa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "medusa/kernels.hpp"

namespace medusa {
namespace {

using detail::op_output;

void require_4d(const Tensor& t, const char* what) {
    if (t.ndim() != 4) throw ShapeError(std::string(what) + " must be 4-D, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    require_4d(input, "conv2d input");
    require_4d(weight, "conv2d weight");
    if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
    if (padding < 0) throw ValueError("conv2d: padding must be >= 0");
    const int n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int c_out = weight.dim(0), k = weight.dim(2);
    if (weight.dim(2) != weight.dim(3)) throw ShapeError("conv2d: kernel must be square");
    if (k % 2 == 0) throw ValueError("conv2d: kernel size must be odd");
    if (weight.dim(1) != c_in)
        throw ShapeError("conv2d: input channels " + std::to_string(c_in) +
                         " do not match weight " + shape_str(weight.shape()));
    if (bias.ndim() != 1 || bias.dim(0) != c_out)
        throw ShapeError("conv2d: bias must be [" + std::to_string(c_out) + "]");
    const int out_h = (h + 2 * padding - k) / stride + 1;
    const int out_w = (w + 2 * padding - k) / stride + 1;
    if (h + 2 * padding < k || w + 2 * padding < k)
        throw ShapeError("conv2d: kernel larger than padded input");

    kernels::Conv2dShape cs{n, c_in, h, w, c_out, k, stride, padding, out_h, out_w};
    std::vector<double> out(std::size_t(n) * c_out * out_h * out_w);
    kernels::active().conv2d_fwd(cs, input.data().data(), weight.data().data(),
                                 bias.data().data(), out.data());

    Tensor result = op_output({n, c_out, out_h, out_w}, std::move(out), {&input, &weight, &bias});
    if (result.requires_grad()) {
        auto in_h2 = input.handle();
        auto w_h = weight.handle();
        auto b_h = bias.handle();
        Node* self = result.node();
        self->backward_fn = [cs, in_h2, w_h, b_h, self]() {
            const double* gout = self->grad.data();
            if (in_h2->requires_grad) {
                in_h2->ensure_grad();
                kernels::active().conv2d_bwd_input(cs, gout, w_h->value.data(),
                                                   in_h2->grad.data());
            }
            if (w_h->requires_grad || b_h->requires_grad) {
                double* gw = nullptr;
                double* gb = nullptr;
                std::vector<double> scratch;
                if (w_h->requires_grad) {
                    w_h->ensure_grad();
                    gw = w_h->grad.data();
                } else {
                    scratch.assign(w_h->value.size(), 0.0);
                    gw = scratch.data();
                }
                if (b_h->requires_grad) {
                    b_h->ensure_grad();
                    gb = b_h->grad.data();
                }
                kernels::active().conv2d_bwd_weight(cs, in_h2->value.data(), gout, gw, gb);
            }
        };
    }
    return result;
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  bool training, double momentum, double eps) {
    require_4d(input, "batch_norm input");
    if (eps <= 0.0) throw ValueError("batch_norm: eps must be > 0");
    const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c)
        throw ShapeError("batch_norm: gamma/beta must be [" + std::to_string(c) + "]");
    if (running_mean.size() != std::size_t(c) || running_var.size() != std::size_t(c))
        throw ShapeError("batch_norm: running stats must have one entry per channel");
    const std::size_t hw = std::size_t(h) * w;
    const std::size_t m = std::size_t(n) * hw;
    if (training && m < 2)
        throw ValueError("batch_norm: degenerate variance, need more than one element per channel");

    std::vector<double> mean(c), inv_std(c);
    if (training) {
        for (int ci = 0; ci < c; ++ci) {
            double s = 0.0;
            for (int ni = 0; ni < n; ++ni) {
                const double* p = input.data().data() + (std::size_t(ni) * c + ci) * hw;
                for (std::size_t i = 0; i < hw; ++i) s += p[i];
            }
            const double mu = s / double(m);
            double sq = 0.0;
            for (int ni = 0; ni < n; ++ni) {
                const double* p = input.data().data() + (std::size_t(ni) * c + ci) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double d = p[i] - mu;
                    sq += d * d;
                }
            }
            const double var = sq / double(m);
            mean[ci] = mu;
            inv_std[ci] = 1.0 / std::sqrt(var + eps);
            running_mean[ci] = (1.0 - momentum) * running_mean[ci] + momentum * mu;
            running_var[ci] = (1.0 - momentum) * running_var[ci] + momentum * var;
        }
    } else {
        for (int ci = 0; ci < c; ++ci) {
            mean[ci] = running_mean[ci];
            inv_std[ci] = 1.0 / std::sqrt(running_var[ci] + eps);
        }
    }

    auto xhat = std::make_shared<std::vector<double>>(input.numel());
    std::vector<double> out(input.numel());
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const std::size_t base = (std::size_t(ni) * c + ci) * hw;
            const double mu = mean[ci], inv = inv_std[ci];
            const double g = gamma.data()[ci], b = beta.data()[ci];
            for (std::size_t i = 0; i < hw; ++i) {
                const double xh = (input.data()[base + i] - mu) * inv;
                (*xhat)[base + i] = xh;
                out[base + i] = g * xh + b;
            }
        }
    }

    Tensor result = op_output(input.shape(), std::move(out), {&input, &gamma, &beta});
    if (result.requires_grad()) {
        auto in_h = input.handle();
        auto g_h = gamma.handle();
        auto b_h = beta.handle();
        Node* self = result.node();
        self->backward_fn = [in_h, g_h, b_h, self, xhat, inv_std, n, c, hw, m, training]() {
            const double* gy = self->grad.data();
            for (int ci = 0; ci < c; ++ci) {
                double sum_gy = 0.0, sum_gy_xh = 0.0;
                for (int ni = 0; ni < n; ++ni) {
                    const std::size_t base = (std::size_t(ni) * c + ci) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        sum_gy += gy[base + i];
                        sum_gy_xh += gy[base + i] * (*xhat)[base + i];
                    }
                }
                if (g_h->requires_grad) {
                    g_h->ensure_grad();
                    g_h->grad[ci] += sum_gy_xh;
                }
                if (b_h->requires_grad) {
                    b_h->ensure_grad();
                    b_h->grad[ci] += sum_gy;
                }
                if (in_h->requires_grad) {
                    in_h->ensure_grad();
                    const double gi = g_h->value[ci] * inv_std[ci];
                    for (int ni = 0; ni < n; ++ni) {
                        const std::size_t base = (std::size_t(ni) * c + ci) * hw;
                        for (std::size_t i = 0; i < hw; ++i) {
                            double t = gy[base + i];
                            if (training) {
                                t -= sum_gy / double(m);
                                t -= (*xhat)[base + i] * (sum_gy_xh / double(m));
                            }
                            in_h->grad[base + i] += gi * t;
                        }
                    }
                }
            }
        };
    }
    return result;
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    kernels::active().relu_fwd(x.data().data(), out.data(), x.numel());
    Tensor result = op_output(x.shape(), std::move(out), {&x});
    if (result.requires_grad()) {
        auto x_h = x.handle();
        Node* self = result.node();
        self->backward_fn = [x_h, self]() {
            x_h->ensure_grad();
            kernels::active().relu_bwd(x_h->value.data(), self->grad.data(),
                                       x_h->grad.data(), self->grad.size());
        };
    }
    return result;
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
    Tensor result = op_output(x.shape(), std::move(out), {&x});
    if (result.requires_grad()) {
        auto x_h = x.handle();
        Node* self = result.node();
        self->backward_fn = [x_h, self]() {
            x_h->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) {
                const double y = self->value[i];
                x_h->grad[i] += self->grad[i] * y * (1.0 - y);
            }
        };
    }
    return result;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    std::vector<double> out(a.numel());
    kernels::active().mul(a.data().data(), b.data().data(), out.data(), a.numel());
    Tensor result = op_output(a.shape(), std::move(out), {&a, &b});
    if (result.requires_grad()) {
        auto a_h = a.handle();
        auto b_h = b.handle();
        Node* self = result.node();
        self->backward_fn = [a_h, b_h, self]() {
            if (a_h->requires_grad) {
                a_h->ensure_grad();
                kernels::active().mul_acc(self->grad.data(), b_h->value.data(),
                                          a_h->grad.data(), self->grad.size());
            }
            if (b_h->requires_grad) {
                b_h->ensure_grad();
                kernels::active().mul_acc(self->grad.data(), a_h->value.data(),
                                          b_h->grad.data(), self->grad.size());
            }
        };
    }
    return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    kernels::active().add(a.data().data(), b.data().data(), out.data(), a.numel());
    Tensor result = op_output(a.shape(), std::move(out), {&a, &b});
    if (result.requires_grad()) {
        auto a_h = a.handle();
        auto b_h = b.handle();
        Node* self = result.node();
        self->backward_fn = [a_h, b_h, self]() {
            if (a_h->requires_grad) {
                a_h->ensure_grad();
                kernels::active().axpy(1.0, self->grad.data(), a_h->grad.data(), self->grad.size());
            }
            if (b_h->requires_grad) {
                b_h->ensure_grad();
                kernels::active().axpy(1.0, self->grad.data(), b_h->grad.data(), self->grad.size());
            }
        };
    }
    return result;
}

Tensor scale(const Tensor& x, double s) {
    std::vector<double> out(x.numel());
    kernels::active().scale(x.data().data(), s, out.data(), x.numel());
    Tensor result = op_output(x.shape(), std::move(out), {&x});
    if (result.requires_grad()) {
        auto x_h = x.handle();
        Node* self = result.node();
        self->backward_fn = [x_h, self, s]() {
            x_h->ensure_grad();
            kernels::active().axpy(s, self->grad.data(), x_h->grad.data(), self->grad.size());
        };
    }
    return result;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor result = op_output({1}, {s}, {&x});
    if (result.requires_grad()) {
        auto x_h = x.handle();
        Node* self = result.node();
        self->backward_fn = [x_h, self]() {
            x_h->ensure_grad();
            const double g = self->grad[0];
            for (std::size_t i = 0; i < x_h->grad.size(); ++i) x_h->grad[i] += g;
        };
    }
    return result;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    for (const Tensor& t : xs) require_4d(t, "concat_channels input");
    const int n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
    int c_total = 0;
    for (const Tensor& t : xs) {
        if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w)
            throw ShapeError("concat_channels: inputs must share N, H, W");
        c_total += t.dim(1);
    }
    const std::size_t hw = std::size_t(h) * w;
    std::vector<double> out(std::size_t(n) * c_total * hw);
    std::vector<int> offsets(xs.size());
    int off = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        offsets[i] = off;
        const int ci = xs[i].dim(1);
        for (int ni = 0; ni < n; ++ni) {
            std::copy_n(xs[i].data().data() + std::size_t(ni) * ci * hw, std::size_t(ci) * hw,
                        out.data() + (std::size_t(ni) * c_total + off) * hw);
        }
        off += ci;
    }

    bool rg = false;
    if (Tape::current()) {
        for (const Tensor& t : xs) rg = rg || t.requires_grad();
    }
    Tensor result({n, c_total, h, w}, std::move(out), rg);
    if (rg) {
        std::vector<std::shared_ptr<Node>> handles;
        handles.reserve(xs.size());
        for (const Tensor& t : xs) {
            handles.push_back(t.handle());
            if (t.requires_grad()) result.node()->parents.push_back(t.node());
        }
        Tape::current()->record(result.handle());
        Node* self = result.node();
        self->backward_fn = [handles, offsets, self, n, c_total, hw]() {
            for (std::size_t i = 0; i < handles.size(); ++i) {
                Node* src = handles[i].get();
                if (!src->requires_grad) continue;
                src->ensure_grad();
                const int ci = src->shape[1];
                for (int ni = 0; ni < n; ++ni) {
                    const double* g = self->grad.data() + (std::size_t(ni) * c_total + offsets[i]) * hw;
                    double* dst = src->grad.data() + std::size_t(ni) * ci * hw;
                    kernels::active().axpy(1.0, g, dst, std::size_t(ci) * hw);
                }
            }
        };
    }
    return result;
}

namespace {

struct LerpIndex {
    int i0, i1;
    double w;
};

std::vector<LerpIndex> bilinear_axis(int in, int out, int factor) {
    std::vector<LerpIndex> v(out);
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) / double(factor) - 0.5;
        src = std::clamp(src, 0.0, double(in - 1));
        const int i0 = static_cast<int>(std::floor(src));
        v[o] = {i0, std::min(i0 + 1, in - 1), src - i0};
    }
    return v;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, int factor) {
    require_4d(x, "upsample_bilinear input");
    if (factor < 1) throw ValueError("upsample_bilinear: factor must be >= 1");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = h * factor, ow = w * factor;
    const auto ys = bilinear_axis(h, oh, factor);
    const auto xs = bilinear_axis(w, ow, factor);

    std::vector<double> out(std::size_t(n) * c * oh * ow);
    const std::size_t hw = std::size_t(h) * w;
    const std::size_t ohw = std::size_t(oh) * ow;
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const double* src = x.data().data() + (std::size_t(ni) * c + ci) * hw;
            double* dst = out.data() + (std::size_t(ni) * c + ci) * ohw;
            for (int oy = 0; oy < oh; ++oy) {
                const auto& Y = ys[oy];
                const double* r0 = src + std::size_t(Y.i0) * w;
                const double* r1 = src + std::size_t(Y.i1) * w;
                for (int ox = 0; ox < ow; ++ox) {
                    const auto& X = xs[ox];
                    const double top = r0[X.i0] * (1.0 - X.w) + r0[X.i1] * X.w;
                    const double bot = r1[X.i0] * (1.0 - X.w) + r1[X.i1] * X.w;
                    dst[std::size_t(oy) * ow + ox] = top * (1.0 - Y.w) + bot * Y.w;
                }
            }
        }
    }

    Tensor result = op_output({n, c, oh, ow}, std::move(out), {&x});
    if (result.requires_grad()) {
        auto x_h = x.handle();
        Node* self = result.node();
        self->backward_fn = [x_h, self, ys, xs, n, c, h, w, oh, ow]() {
            x_h->ensure_grad();
            const std::size_t hw = std::size_t(h) * w;
            const std::size_t ohw = std::size_t(oh) * ow;
            for (int ni = 0; ni < n; ++ni) {
                for (int ci = 0; ci < c; ++ci) {
                    double* gsrc = x_h->grad.data() + (std::size_t(ni) * c + ci) * hw;
                    const double* g = self->grad.data() + (std::size_t(ni) * c + ci) * ohw;
                    for (int oy = 0; oy < oh; ++oy) {
                        const auto& Y = ys[oy];
                        for (int ox = 0; ox < ow; ++ox) {
                            const auto& X = xs[ox];
                            const double gv = g[std::size_t(oy) * ow + ox];
                            gsrc[std::size_t(Y.i0) * w + X.i0] += gv * (1.0 - Y.w) * (1.0 - X.w);
                            gsrc[std::size_t(Y.i0) * w + X.i1] += gv * (1.0 - Y.w) * X.w;
                            gsrc[std::size_t(Y.i1) * w + X.i0] += gv * Y.w * (1.0 - X.w);
                            gsrc[std::size_t(Y.i1) * w + X.i1] += gv * Y.w * X.w;
                        }
                    }
                }
            }
        };
    }
    return result;
}

}  // namespace medusa

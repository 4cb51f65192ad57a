#include "medusa/losses.hpp"

#include <cmath>

namespace medusa {
namespace {

using detail::op_output;

double softplus(double x) {
    // log(1 + e^x) without overflow
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    const std::size_t n = pred.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(pred.data()[i] - target.data()[i]);
    Tensor result = op_output({1}, {acc / double(n)}, {&pred, &target});
    if (result.requires_grad()) {
        auto p_h = pred.handle();
        auto t_h = target.handle();
        Node* self = result.node();
        self->backward_fn = [p_h, t_h, self, n]() {
            const double g = self->grad[0] / double(n);
            if (p_h->requires_grad) {
                p_h->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = p_h->value[i] - t_h->value[i];
                    p_h->grad[i] += d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
                }
            }
            if (t_h->requires_grad) {
                t_h->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = p_h->value[i] - t_h->value[i];
                    t_h->grad[i] -= d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
                }
            }
        };
    }
    return result;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels, int ignore_index) {
    if (logits.ndim() != 4)
        throw ShapeError("cross_entropy: logits must be N x K x H x W");
    const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    const std::size_t hw = std::size_t(h) * w;
    const std::size_t npix = std::size_t(n) * hw;
    if (labels.size() != npix)
        throw ShapeError("cross_entropy: expected " + std::to_string(npix) + " labels, got " +
                         std::to_string(labels.size()));

    std::size_t valid = 0;
    double acc = 0.0;
    for (std::size_t p = 0; p < npix; ++p) {
        const int y = labels[p];
        if (y == ignore_index) continue;
        if (y < 0 || y >= k)
            throw LabelError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(k) + ")");
        ++valid;
        const std::size_t ni = p / hw, pi = p % hw;
        const double* base = logits.data().data() + (std::size_t(ni) * k) * hw + pi;
        double mx = base[0];
        for (int c = 1; c < k; ++c) mx = std::max(mx, base[std::size_t(c) * hw]);
        double se = 0.0;
        for (int c = 0; c < k; ++c) se += std::exp(base[std::size_t(c) * hw] - mx);
        acc += mx + std::log(se) - base[std::size_t(y) * hw];
    }
    if (valid == 0) throw MetricError("cross_entropy: every pixel is ignored");

    Tensor result = op_output({1}, {acc / double(valid)}, {&logits});
    if (result.requires_grad()) {
        auto l_h = logits.handle();
        Node* self = result.node();
        self->backward_fn = [l_h, self, labels, ignore_index, k, hw, npix, valid]() {
            l_h->ensure_grad();
            const double g = self->grad[0] / double(valid);
            for (std::size_t p = 0; p < npix; ++p) {
                const int y = labels[p];
                if (y == ignore_index) continue;
                const std::size_t ni = p / hw, pi = p % hw;
                const double* base = l_h->value.data() + (std::size_t(ni) * k) * hw + pi;
                double* gbase = l_h->grad.data() + (std::size_t(ni) * k) * hw + pi;
                double mx = base[0];
                for (int c = 1; c < k; ++c) mx = std::max(mx, base[std::size_t(c) * hw]);
                double se = 0.0;
                for (int c = 0; c < k; ++c) se += std::exp(base[std::size_t(c) * hw] - mx);
                for (int c = 0; c < k; ++c) {
                    const double sm = std::exp(base[std::size_t(c) * hw] - mx) / se;
                    gbase[std::size_t(c) * hw] += g * (sm - (c == y ? 1.0 : 0.0));
                }
            }
        };
    }
    return result;
}

Tensor weighted_bce(const Tensor& logits, const Tensor& target, double pos_weight) {
    if (logits.shape() != target.shape())
        throw ShapeError("weighted_bce: shape mismatch " + shape_str(logits.shape()) + " vs " +
                         shape_str(target.shape()));
    if (pos_weight <= 0.0 || pos_weight > 1.0)
        throw ValueError("weighted_bce: pos_weight must be in (0, 1]");
    const std::size_t n = logits.numel();
    const double neg_weight = 1.0 - pos_weight;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = logits.data()[i], t = target.data()[i];
        acc += pos_weight * t * softplus(-x) + neg_weight * (1.0 - t) * softplus(x);
    }
    Tensor result = op_output({1}, {acc / double(n)}, {&logits, &target});
    if (result.requires_grad()) {
        auto l_h = logits.handle();
        auto t_h = target.handle();
        Node* self = result.node();
        self->backward_fn = [l_h, t_h, self, n, pos_weight, neg_weight]() {
            const double g = self->grad[0] / double(n);
            if (l_h->requires_grad) {
                l_h->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const double s = sigmoid_d(l_h->value[i]);
                    const double t = t_h->value[i];
                    l_h->grad[i] += g * (pos_weight * t * (s - 1.0) + neg_weight * (1.0 - t) * s);
                }
            }
            if (t_h->requires_grad) {
                t_h->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = l_h->value[i];
                    t_h->grad[i] += g * (pos_weight * softplus(-x) - neg_weight * softplus(x));
                }
            }
        };
    }
    return result;
}

}  // namespace medusa

#include "medusa/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace medusa {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    n_ = std::make_shared<Node>();
    n_->shape = std::move(shape);
    n_->value = std::move(data);
    n_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> d(shape_numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    std::vector<double> d(shape_numel(shape), v);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return n_->value[0];
}

std::span<const double> Tensor::grad() const {
    if (n_->grad.empty()) throw StateError("tensor has no gradient");
    return n_->grad;
}

namespace {
thread_local Tape* t_current = nullptr;
}

Tape* Tape::current() { return t_current; }

TapeScope::TapeScope(Tape& t) : prev_(t_current) { t_current = &t; }
TapeScope::~TapeScope() { t_current = prev_; }

NoGradScope::NoGradScope() : prev_(t_current) { t_current = nullptr; }
NoGradScope::~NoGradScope() { t_current = prev_; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ValueError("backward requires a scalar loss");
    Tape* tape = Tape::current();
    if (!tape || tape->size() == 0) throw StateError("backward requires an active, nonempty tape");
    if (!loss.requires_grad())
        throw ValueError("loss does not require grad (was it recorded on the tape?)");

    // Everything the loss depends on.
    std::unordered_set<Node*> reachable;
    std::vector<Node*> stack{loss.node()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!reachable.insert(n).second) continue;
        for (Node* p : n->parents) stack.push_back(p);
    }

    // Interior adjoints are per-call scratch; leaf grads persist so that
    // sequential backward calls accumulate.
    for (Node* n : reachable) {
        if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;

    const auto& nodes = tape->nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        Node* n = it->get();
        if (n->backward_fn && reachable.count(n)) n->backward_fn();
    }
}

namespace detail {

Tensor op_output(Shape shape, std::vector<double> value,
                 std::initializer_list<const Tensor*> inputs) {
    bool rg = false;
    if (Tape::current()) {
        for (const Tensor* t : inputs) rg = rg || t->requires_grad();
    }
    Tensor out(std::move(shape), std::move(value), rg);
    if (rg) {
        for (const Tensor* t : inputs) {
            if (t->requires_grad()) out.node()->parents.push_back(t->node());
        }
        Tape::current()->record(out.handle());
    }
    return out;
}

}  // namespace detail

}  // namespace medusa

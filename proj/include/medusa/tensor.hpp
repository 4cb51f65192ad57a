#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "medusa/errors.hpp"

namespace medusa {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One value in the computation graph. Interior nodes carry a backward rule
// that pushes adjoints into their parents; leaves (parameters, inputs)
// accumulate into `grad` across backward calls until cleared.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<Node*> parents;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
    bool is_leaf() const { return !backward_fn; }
};

class Tensor {
  public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    std::size_t numel() const { return n_->value.size(); }

    std::span<const double> data() const { return n_->value; }
    std::span<double> data() { return n_->value; }
    double item() const;

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }
    bool has_grad() const { return !n_->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad() { n_->grad.clear(); }

    Node* node() const { return n_.get(); }
    const std::shared_ptr<Node>& handle() const { return n_; }

  private:
    std::shared_ptr<Node> n_;
};

// Execution-ordered record of one forward pass. Operations append their
// output nodes as they run, so the list is topologically sorted by
// construction.
class Tape {
  public:
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    void record(std::shared_ptr<Node> n) { nodes_.push_back(std::move(n)); }
    const std::vector<std::shared_ptr<Node>>& nodes() const { return nodes_; }

    static Tape* current();

  private:
    std::vector<std::shared_ptr<Node>> nodes_;
    friend class TapeScope;
    friend class NoGradScope;
};

// Makes `tape` the recording target for the current thread.
class TapeScope {
  public:
    explicit TapeScope(Tape& t);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* prev_;
};

class NoGradScope {
  public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

  private:
    Tape* prev_;
};

inline bool grad_enabled() { return Tape::current() != nullptr; }

// Runs reverse-mode accumulation from a scalar loss over the current tape.
// Leaf gradients accumulate across calls; interior adjoints are reset per
// call.
void backward(const Tensor& loss);

namespace detail {
// Shared by ops: wraps a freshly computed value as a node and records it on
// the active tape when grad is flowing from any input. The caller installs
// backward_fn afterwards iff the result requires grad.
Tensor op_output(Shape shape, std::vector<double> value,
                 std::initializer_list<const Tensor*> inputs);
}  // namespace detail

}  // namespace medusa

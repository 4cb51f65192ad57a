#include "medusa/optim.hpp"

#include <cmath>

#include "medusa/kernels.hpp"

namespace medusa {

double poly_lr(long step, long total_steps, double base_lr, double power) {
    if (total_steps <= 0) throw ValueError("poly_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) throw ValueError("poly_lr: step outside [0, total_steps]");
    return base_lr * std::pow(1.0 - double(step) / double(total_steps), power);
}

void Adam::add_param(Parameter* p, double lr_scale) {
    Slot s;
    s.param = p;
    s.lr_scale = lr_scale;
    s.m.assign(p->tensor.numel(), 0.0);
    s.v.assign(p->tensor.numel(), 0.0);
    slots_.push_back(std::move(s));
}

void Adam::add_group(const std::vector<Parameter*>& params, double lr_scale) {
    for (Parameter* p : params) add_param(p, lr_scale);
}

void Adam::step(double lr_t) {
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, double(step_));
    for (Slot& s : slots_) {
        if (s.param->frozen) continue;
        Node* n = s.param->tensor.node();
        if (n->grad.empty())
            throw StateError("adam: parameter " + s.param->name + " has no gradient");
        kernels::active().adam_update(n->value.data(), n->grad.data(), s.m.data(), s.v.data(),
                                      n->value.size(), lr_t * s.lr_scale, opts_.beta1,
                                      opts_.beta2, opts_.eps, bc1, bc2);
    }
}

void Adam::zero_grad() {
    for (Slot& s : slots_) s.param->tensor.zero_grad();
}

}  // namespace medusa

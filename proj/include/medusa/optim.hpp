#pragma once

#include <vector>

#include "medusa/nn.hpp"

namespace medusa {

// base_lr * (1 - step/total_steps)^power
double poly_lr(long step, long total_steps, double base_lr, double power);

// Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8. Parameters
// join in groups carrying an lr multiplier (backbone trains at lr*0.1).
class Adam {
  public:
    struct Options {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    explicit Adam(Options opts) : opts_(opts) {}

    void add_param(Parameter* p, double lr_scale = 1.0);
    void add_group(const std::vector<Parameter*>& params, double lr_scale);

    // One update at learning rate lr_t. Frozen parameters are untouched;
    // an unfrozen parameter with no gradient is an error.
    void step(double lr_t);
    void zero_grad();
    long step_count() const { return step_; }

  private:
    struct Slot {
        Parameter* param;
        double lr_scale;
        std::vector<double> m, v;
    };

    Options opts_;
    std::vector<Slot> slots_;
    long step_ = 0;
};

}  // namespace medusa

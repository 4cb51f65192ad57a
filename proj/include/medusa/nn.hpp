#pragma once

#include <memory>
#include <string>
#include <vector>

#include "medusa/ops.hpp"
#include "medusa/rng.hpp"
#include "medusa/tensor.hpp"

namespace medusa {

// A named learnable tensor. Frozen parameters are skipped by the optimizer
// and drop out of the tape (requires_grad false), so their data is
// bit-identical across training steps.
struct Parameter {
    Tensor tensor;
    std::string name;
    bool frozen = false;

    void freeze() {
        frozen = true;
        tensor.set_requires_grad(false);
    }
};

// Non-learnable state that still belongs in checkpoints (BN running stats).
struct Buffer {
    std::vector<double>* data;
    std::string name;
};

struct BatchNorm2d;

struct ModuleState {
    std::vector<Parameter*> params;
    std::vector<Buffer> buffers;
    std::vector<BatchNorm2d*> bns;
};

struct Conv2d {
    Parameter weight;  // c_out x c_in x k x k
    Parameter bias;    // c_out
    int stride = 1;
    int padding = 0;

    Conv2d(const std::string& name, int c_in, int c_out, int k, int stride, Rng& rng);
    Tensor forward(const Tensor& x) const { return conv2d(x, weight.tensor, bias.tensor, stride, padding); }
    void collect(ModuleState& out);
    std::size_t param_count() const { return weight.tensor.numel() + bias.tensor.numel(); }
};

struct BatchNorm2d {
    Parameter gamma;
    Parameter beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    std::string name;
    bool stats_frozen = false;  // frozen modules normalize with running stats

    BatchNorm2d(const std::string& name, int channels);
    Tensor forward(const Tensor& x, bool training) {
        return batch_norm(x, gamma.tensor, beta.tensor, running_mean, running_var,
                          training && !stats_frozen);
    }
    void collect(ModuleState& out);
    std::size_t param_count() const { return gamma.tensor.numel() + beta.tensor.numel(); }
};

// conv -> batch norm -> relu
struct ConvBlock {
    Conv2d conv;
    BatchNorm2d bn;

    ConvBlock(const std::string& name, int c_in, int c_out, int k, int stride, Rng& rng)
        : conv(name + ".conv", c_in, c_out, k, stride, rng), bn(name + ".bn", c_out) {}
    Tensor forward(const Tensor& x, bool training) {
        return relu(bn.forward(conv.forward(x), training));
    }
    void collect(ModuleState& out) {
        conv.collect(out);
        bn.collect(out);
    }
    std::size_t param_count() const { return conv.param_count() + bn.param_count(); }
};

// R(F) = conv_block(F) + F
struct ResidualBlock {
    ConvBlock block;

    ResidualBlock(const std::string& name, int channels, Rng& rng)
        : block(name + ".block", channels, channels, 3, 1, rng) {}
    Tensor forward(const Tensor& x, bool training) {
        return add(block.forward(x, training), x);
    }
    void collect(ModuleState& out) { block.collect(out); }
    std::size_t param_count() const { return block.param_count(); }
};

void freeze_module(ModuleState& state);

}  // namespace medusa

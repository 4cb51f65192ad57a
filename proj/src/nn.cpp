#include "medusa/nn.hpp"

#include <cmath>

namespace medusa {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL + salt;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_string(std::string_view s) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Conv2d::Conv2d(const std::string& name, int c_in, int c_out, int k, int stride, Rng& rng)
    : stride(stride), padding((k - 1) / 2) {
    const int fan_in = c_in * k * k;
    const double bound = std::sqrt(6.0 / double(fan_in));
    std::vector<double> w(std::size_t(c_out) * c_in * k * k);
    for (double& v : w) v = rng.uniform(-bound, bound);
    weight.tensor = Tensor({c_out, c_in, k, k}, std::move(w), true);
    weight.name = name + ".weight";
    bias.tensor = Tensor::zeros({c_out}, true);
    bias.name = name + ".bias";
}

void Conv2d::collect(ModuleState& out) {
    out.params.push_back(&weight);
    out.params.push_back(&bias);
}

BatchNorm2d::BatchNorm2d(const std::string& name, int channels) : name(name) {
    gamma.tensor = Tensor::full({channels}, 1.0, true);
    gamma.name = name + ".gamma";
    beta.tensor = Tensor::zeros({channels}, true);
    beta.name = name + ".beta";
    running_mean.assign(channels, 0.0);
    running_var.assign(channels, 1.0);
}

void BatchNorm2d::collect(ModuleState& out) {
    out.params.push_back(&gamma);
    out.params.push_back(&beta);
    out.buffers.push_back({&running_mean, name + ".running_mean"});
    out.buffers.push_back({&running_var, name + ".running_var"});
    out.bns.push_back(this);
}

void freeze_module(ModuleState& state) {
    for (Parameter* p : state.params) p->freeze();
    for (BatchNorm2d* bn : state.bns) bn->stats_frozen = true;
}

}  // namespace medusa

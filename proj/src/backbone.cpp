#include "medusa/backbone.hpp"

#include <string>

namespace medusa {

namespace {
bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }
}

void BackboneConfig::validate() const {
    if (scales.empty() || scales.size() != channels.size())
        throw ValueError("backbone config: scales and channels must be non-empty and equal length");
    int prev = 0;
    for (int s : scales) {
        if (!is_pow2(s) || s <= prev)
            throw ValueError("backbone config: scales must be strictly increasing powers of two");
        prev = s;
    }
    for (int c : channels)
        if (c < 1) throw ValueError("backbone config: channels must be positive");
    if (stem_channels < 1 || blocks_per_scale < 1)
        throw ValueError("backbone config: stem_channels and blocks_per_scale must be positive");
}

int BackboneConfig::channel_sum() const {
    int s = 0;
    for (int c : channels) s += c;
    return s;
}

Backbone::Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    // stem: one stride-2 block per halving down to scales[0]
    int steps = 0;
    for (int s = cfg_.scales[0]; s > 1; s /= 2) ++steps;
    int c_prev = 3;
    for (int i = 0; i < steps; ++i) {
        const int c_out = (i + 1 == steps) ? cfg_.channels[0] : cfg_.stem_channels;
        stem_.emplace_back("backbone.stem" + std::to_string(i), c_prev, c_out, 3, 2, rng);
        c_prev = c_out;
    }

    for (int si = 0; si < cfg_.num_scales(); ++si) {
        Stage stage;
        const std::string prefix = "backbone.stage" + std::to_string(si);
        if (si > 0) {
            const int stride = cfg_.scales[si] / cfg_.scales[si - 1];
            stage.transition.emplace(prefix + ".transition", cfg_.channels[si - 1],
                                     cfg_.channels[si], 3, stride, rng);
        }
        for (int b = 0; b < cfg_.blocks_per_scale; ++b) {
            stage.blocks.emplace_back(prefix + ".block" + std::to_string(b), cfg_.channels[si], rng);
        }
        stages_.push_back(std::move(stage));
    }
}

ScalePyramid Backbone::forward(const Tensor& image, bool training) {
    if (image.ndim() != 4 || image.dim(1) != 3)
        throw ShapeError("backbone expects N x 3 x H x W input, got " + shape_str(image.shape()));
    const int h = image.dim(2), w = image.dim(3);
    if (h % cfg_.max_scale() != 0 || w % cfg_.max_scale() != 0)
        throw ShapeError("input " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by max scale " + std::to_string(cfg_.max_scale()));

    Tensor x = image;
    for (ConvBlock& blk : stem_) x = blk.forward(x, training);

    ScalePyramid pyr;
    for (Stage& stage : stages_) {
        if (stage.transition) x = stage.transition->forward(x, training);
        for (ResidualBlock& blk : stage.blocks) x = blk.forward(x, training);
        pyr.features.push_back(x);
    }
    return pyr;
}

void Backbone::collect(ModuleState& out) {
    for (ConvBlock& blk : stem_) blk.collect(out);
    for (Stage& stage : stages_) {
        if (stage.transition) stage.transition->collect(out);
        for (ResidualBlock& blk : stage.blocks) blk.collect(out);
    }
}

std::size_t Backbone::param_count() const {
    std::size_t n = 0;
    for (const ConvBlock& blk : stem_) n += blk.param_count();
    for (const Stage& stage : stages_) {
        if (stage.transition) n += stage.transition->param_count();
        for (const ResidualBlock& blk : stage.blocks) n += blk.param_count();
    }
    return n;
}

}  // namespace medusa

#pragma once

#include <optional>
#include <vector>

#include "medusa/nn.hpp"

namespace medusa {

struct BackboneConfig {
    std::vector<int> scales = {4, 8, 16, 32};   // downsample factors, increasing powers of two
    std::vector<int> channels = {8, 16, 32, 64};
    int stem_channels = 8;
    int blocks_per_scale = 1;

    void validate() const;
    int max_scale() const { return scales.back(); }
    int num_scales() const { return static_cast<int>(scales.size()); }
    int channel_sum() const;
};

// features[s] is N x channels[s] x H/scales[s] x W/scales[s]
struct ScalePyramid {
    std::vector<Tensor> features;
};

// Shared multi-resolution feature extractor: strided-conv stem down to
// scales[0], then one strided stage per remaining scale, each stage ending
// in blocks_per_scale residual blocks.
class Backbone {
  public:
    Backbone(const BackboneConfig& cfg, Rng& rng);

    ScalePyramid forward(const Tensor& image, bool training);
    void collect(ModuleState& out);
    std::size_t param_count() const;
    const BackboneConfig& config() const { return cfg_; }

  private:
    struct Stage {
        std::optional<ConvBlock> transition;  // absent for the first stage
        std::vector<ResidualBlock> blocks;
    };

    BackboneConfig cfg_;
    std::vector<ConvBlock> stem_;
    std::vector<Stage> stages_;
};

}  // namespace medusa

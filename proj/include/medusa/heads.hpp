#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medusa/backbone.hpp"
#include "medusa/nn.hpp"

namespace medusa {

enum class LossKind { L1, CrossEntropy, WeightedBce };
enum class MetricKind { Rmse, MIoU, BceError };

struct TaskSpec {
    std::string name;
    int out_channels = 1;
    LossKind loss_kind = LossKind::L1;
    MetricKind metric_kind = MetricKind::Rmse;
    bool lower_is_better = true;
    double pos_weight = 0.95;  // WeightedBce only

    void validate() const;
};

// Built-in tasks of the synthetic benchmark:
// depth, segm, normals, edges, saliency, parts.
TaskSpec task_spec_by_name(const std::string& name);

enum class HeadKind { Msa, HrHead };

std::string head_kind_str(HeadKind k);
HeadKind head_kind_from_str(const std::string& s);

// A(F) = sigmoid(conv_block_1(F)) .* conv_block_2(F); the 1x1 gate branch
// masks the 3x3 value branch per channel and pixel. Gate values land in
// [0.5, 1) because the gate branch ends in a ReLU.
struct SpatialAttention {
    ConvBlock conv1;  // gate, 1x1
    ConvBlock conv2;  // value, 3x3

    SpatialAttention(const std::string& name, int channels, Rng& rng)
        : conv1(name + ".conv1", channels, channels, 1, 1, rng),
          conv2(name + ".conv2", channels, channels, 3, 1, rng) {}
    Tensor forward(const Tensor& fmap, bool training) {
        return hadamard(sigmoid(conv1.forward(fmap, training)), conv2.forward(fmap, training));
    }
    void collect(ModuleState& out) {
        conv1.collect(out);
        conv2.collect(out);
    }
    std::size_t param_count() const { return conv1.param_count() + conv2.param_count(); }
};

struct TaskOutput {
    Tensor prediction;                 // N x out_channels x H x W (label resolution)
    std::vector<Tensor> initial_preds; // per scale, upsampled to label resolution; training only
};

// One task's private parameters: per-scale SFA gates (or plain conv blocks
// when the ablation disables them), two residual refiners, an initial
// 1x1 prediction conv, optional MSA gates, and the final fusion conv.
class TaskHead {
  public:
    TaskHead(const TaskSpec& spec, const BackboneConfig& cfg, HeadKind kind,
             bool sfa_enabled, Rng& rng);

    TaskOutput forward(const ScalePyramid& pyramid, bool training);

    // Stages exposed separately so the fusion paths can be exercised alone.
    std::vector<Tensor> apply_sfa(const ScalePyramid& pyramid, bool training);
    std::vector<Tensor> refine(const std::vector<Tensor>& task_feats, bool training);
    std::vector<Tensor> initial_predict(const std::vector<Tensor>& refined, bool training);
    Tensor msa_combine(const std::vector<Tensor>& refined, bool training);
    Tensor hrhead_combine(const std::vector<Tensor>& refined, bool training);

    void collect(ModuleState& out);
    std::size_t param_count() const;

    const TaskSpec& spec() const { return spec_; }
    HeadKind kind() const { return kind_; }
    bool sfa_enabled() const { return sfa_enabled_; }

  private:
    struct PerScale {
        std::optional<SpatialAttention> sfa;
        std::optional<ConvBlock> plain;  // ablation replacement for the SFA
        std::vector<ResidualBlock> refiners;
        std::optional<Conv2d> init_pred;
        std::optional<SpatialAttention> msa;
    };

    Tensor fuse(const std::vector<Tensor>& per_scale, bool training);

    TaskSpec spec_;
    BackboneConfig cfg_;
    HeadKind kind_;
    bool sfa_enabled_;
    std::vector<PerScale> scales_;
    std::optional<Conv2d> final_conv_;
};

// Exact learnable-scalar count of a head, in closed form. Must agree with
// enumerating an instantiated head's parameters.
std::size_t head_param_count(const BackboneConfig& cfg, const TaskSpec& task,
                             HeadKind kind, bool sfa_enabled = true);

// Learnable scalars of one SpatialAttention block per pyramid scale; the
// stylized unit for pairwise task-connection cost models.
std::size_t pair_block_param_count(const BackboneConfig& cfg);

}  // namespace medusa

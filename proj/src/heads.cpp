#include "medusa/heads.hpp"

namespace medusa {

void TaskSpec::validate() const {
    if (name.empty()) throw ValueError("task spec: empty name");
    if (out_channels < 1) throw ValueError("task spec: out_channels must be >= 1");
    if (metric_kind == MetricKind::Rmse && !lower_is_better)
        throw ValueError("task spec: RMSE is lower-is-better");
    if (metric_kind == MetricKind::MIoU && lower_is_better)
        throw ValueError("task spec: mIoU is higher-is-better");
    if (loss_kind == LossKind::WeightedBce && (pos_weight <= 0.0 || pos_weight > 1.0))
        throw ValueError("task spec: pos_weight must be in (0, 1]");
}

TaskSpec task_spec_by_name(const std::string& name) {
    // label geometry constants live in data.hpp; counts here must match
    if (name == "depth") return {"depth", 1, LossKind::L1, MetricKind::Rmse, true, 0.95};
    if (name == "segm") return {"segm", 5, LossKind::CrossEntropy, MetricKind::MIoU, false, 0.95};
    if (name == "normals") return {"normals", 3, LossKind::L1, MetricKind::Rmse, true, 0.95};
    if (name == "edges") return {"edges", 1, LossKind::WeightedBce, MetricKind::BceError, true, 0.95};
    if (name == "saliency") return {"saliency", 1, LossKind::WeightedBce, MetricKind::MIoU, false, 0.75};
    if (name == "parts") return {"parts", 9, LossKind::CrossEntropy, MetricKind::MIoU, false, 0.95};
    throw ValueError("unknown task: " + name);
}

std::string head_kind_str(HeadKind k) { return k == HeadKind::Msa ? "msa" : "hrhead"; }

HeadKind head_kind_from_str(const std::string& s) {
    if (s == "msa") return HeadKind::Msa;
    if (s == "hrhead") return HeadKind::HrHead;
    throw ValueError("unknown head kind: " + s + " (expected msa or hrhead)");
}

TaskHead::TaskHead(const TaskSpec& spec, const BackboneConfig& cfg, HeadKind kind,
                   bool sfa_enabled, Rng& rng)
    : spec_(spec), cfg_(cfg), kind_(kind), sfa_enabled_(sfa_enabled) {
    spec_.validate();
    cfg_.validate();
    const std::string base = "head." + spec_.name;
    for (int si = 0; si < cfg_.num_scales(); ++si) {
        const std::string prefix = base + ".scale" + std::to_string(si);
        const int c = cfg_.channels[si];
        PerScale ps;
        if (sfa_enabled_) {
            ps.sfa.emplace(prefix + ".sfa", c, rng);
        } else {
            ps.plain.emplace(prefix + ".conn", c, c, 3, 1, rng);
        }
        ps.refiners.emplace_back(prefix + ".refine1", c, rng);
        ps.refiners.emplace_back(prefix + ".refine2", c, rng);
        ps.init_pred.emplace(prefix + ".init_pred", c, spec_.out_channels, 1, 1, rng);
        if (kind_ == HeadKind::Msa) ps.msa.emplace(prefix + ".msa", c, rng);
        scales_.push_back(std::move(ps));
    }
    final_conv_.emplace(base + ".final_conv", cfg_.channel_sum(), spec_.out_channels, 1, 1, rng);
}

std::vector<Tensor> TaskHead::apply_sfa(const ScalePyramid& pyramid, bool training) {
    if (pyramid.features.size() != scales_.size())
        throw ShapeError("pyramid has " + std::to_string(pyramid.features.size()) +
                         " scales, head expects " + std::to_string(scales_.size()));
    std::vector<Tensor> out;
    out.reserve(scales_.size());
    for (std::size_t si = 0; si < scales_.size(); ++si) {
        const Tensor& f = pyramid.features[si];
        if (f.dim(1) != cfg_.channels[si])
            throw ShapeError("scale " + std::to_string(si) + " has " + std::to_string(f.dim(1)) +
                             " channels, expected " + std::to_string(cfg_.channels[si]));
        out.push_back(sfa_enabled_ ? scales_[si].sfa->forward(f, training)
                                   : scales_[si].plain->forward(f, training));
    }
    return out;
}

std::vector<Tensor> TaskHead::refine(const std::vector<Tensor>& task_feats, bool training) {
    if (task_feats.size() != scales_.size())
        throw ShapeError("refine: wrong number of scales");
    std::vector<Tensor> out;
    out.reserve(scales_.size());
    for (std::size_t si = 0; si < scales_.size(); ++si) {
        Tensor x = task_feats[si];
        for (ResidualBlock& rb : scales_[si].refiners) x = rb.forward(x, training);
        out.push_back(x);
    }
    return out;
}

std::vector<Tensor> TaskHead::initial_predict(const std::vector<Tensor>& refined, bool training) {
    if (refined.size() != scales_.size()) throw ShapeError("initial_predict: wrong number of scales");
    std::vector<Tensor> out;
    out.reserve(scales_.size());
    for (std::size_t si = 0; si < scales_.size(); ++si) {
        Tensor p = scales_[si].init_pred->forward(refined[si]);
        out.push_back(upsample_bilinear(p, cfg_.scales[si]));
    }
    (void)training;
    return out;
}

Tensor TaskHead::fuse(const std::vector<Tensor>& per_scale, bool training) {
    // bring every scale to the finest pyramid resolution, highest first
    std::vector<Tensor> aligned;
    aligned.reserve(per_scale.size());
    for (std::size_t si = 0; si < per_scale.size(); ++si) {
        const int f = cfg_.scales[si] / cfg_.scales[0];
        aligned.push_back(f == 1 ? per_scale[si] : upsample_bilinear(per_scale[si], f));
    }
    Tensor fused = final_conv_->forward(concat_channels(aligned));
    (void)training;
    return upsample_bilinear(fused, cfg_.scales[0]);
}

Tensor TaskHead::msa_combine(const std::vector<Tensor>& refined, bool training) {
    if (kind_ != HeadKind::Msa) throw StateError("msa_combine on a non-MSA head");
    if (refined.size() != scales_.size()) throw ShapeError("msa_combine: wrong number of scales");
    std::vector<Tensor> gated;
    gated.reserve(scales_.size());
    for (std::size_t si = 0; si < scales_.size(); ++si)
        gated.push_back(scales_[si].msa->forward(refined[si], training));
    return fuse(gated, training);
}

Tensor TaskHead::hrhead_combine(const std::vector<Tensor>& refined, bool training) {
    if (kind_ != HeadKind::HrHead) throw StateError("hrhead_combine on a non-HRHead head");
    if (refined.size() != scales_.size()) throw ShapeError("hrhead_combine: wrong number of scales");
    return fuse(refined, training);
}

TaskOutput TaskHead::forward(const ScalePyramid& pyramid, bool training) {
    TaskOutput out;
    std::vector<Tensor> feats = apply_sfa(pyramid, training);
    std::vector<Tensor> refined = refine(feats, training);
    if (training) out.initial_preds = initial_predict(refined, training);
    out.prediction = kind_ == HeadKind::Msa ? msa_combine(refined, training)
                                            : hrhead_combine(refined, training);
    return out;
}

void TaskHead::collect(ModuleState& out) {
    for (PerScale& ps : scales_) {
        if (ps.sfa) ps.sfa->collect(out);
        if (ps.plain) ps.plain->collect(out);
        for (ResidualBlock& rb : ps.refiners) rb.collect(out);
        ps.init_pred->collect(out);
        if (ps.msa) ps.msa->collect(out);
    }
    final_conv_->collect(out);
}

std::size_t TaskHead::param_count() const {
    std::size_t n = 0;
    for (const PerScale& ps : scales_) {
        if (ps.sfa) n += ps.sfa->param_count();
        if (ps.plain) n += ps.plain->param_count();
        for (const ResidualBlock& rb : ps.refiners) n += rb.param_count();
        n += ps.init_pred->param_count();
        if (ps.msa) n += ps.msa->param_count();
    }
    n += final_conv_->param_count();
    return n;
}

namespace {

// learnable scalars of conv + bn + relu
std::size_t conv_params(int c_in, int c_out, int k) {
    return std::size_t(c_out) * c_in * k * k + c_out;
}
std::size_t conv_block_params(int c_in, int c_out, int k) {
    return conv_params(c_in, c_out, k) + 2 * std::size_t(c_out);
}
std::size_t attention_params(int c) {
    return conv_block_params(c, c, 1) + conv_block_params(c, c, 3);
}

}  // namespace

std::size_t head_param_count(const BackboneConfig& cfg, const TaskSpec& task,
                             HeadKind kind, bool sfa_enabled) {
    cfg.validate();
    task.validate();
    std::size_t n = 0;
    for (int c : cfg.channels) {
        n += sfa_enabled ? attention_params(c) : conv_block_params(c, c, 3);
        n += 2 * conv_block_params(c, c, 3);            // residual refiners
        n += conv_params(c, task.out_channels, 1);      // initial prediction
        if (kind == HeadKind::Msa) n += attention_params(c);
    }
    n += conv_params(cfg.channel_sum(), task.out_channels, 1);  // fusion conv
    return n;
}

std::size_t pair_block_param_count(const BackboneConfig& cfg) {
    std::size_t n = 0;
    for (int c : cfg.channels) n += attention_params(c);
    return n;
}

}  // namespace medusa

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "medusa/backbone.hpp"
#include "medusa/heads.hpp"

namespace medusa {

// Shared backbone plus independent per-task heads. Heads are seeded from
// (seed, head name) so a head's initialization does not depend on which
// other heads exist.
class MedusaModel {
  public:
    MedusaModel(const BackboneConfig& cfg, std::uint64_t seed);

    TaskHead& add_head(const TaskSpec& spec, HeadKind kind, bool sfa_enabled);
    bool has_head(const std::string& task) const;
    TaskHead& head(const std::string& task);
    const std::vector<std::unique_ptr<TaskHead>>& heads() const { return heads_; }
    Backbone& backbone() { return backbone_; }
    const BackboneConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    ScalePyramid extract_features(const Tensor& images, bool training) {
        return backbone_.forward(images, training);
    }

    ModuleState state();           // backbone then heads, roster order
    ModuleState backbone_state();
    ModuleState head_state(const std::string& task);

    // Freezes the backbone and every existing head (parameters and BN
    // statistics); subsequently attached heads remain trainable.
    void freeze_backbone_and_heads();
    bool backbone_frozen() const;

    std::size_t param_count();

  private:
    BackboneConfig cfg_;
    std::uint64_t seed_;
    Backbone backbone_;
    std::vector<std::unique_ptr<TaskHead>> heads_;
};

}  // namespace medusa

#include "medusa/model.hpp"

namespace medusa {

MedusaModel::MedusaModel(const BackboneConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), backbone_([&] {
          Rng rng(seed_for(seed, "backbone"));
          return Backbone(cfg, rng);
      }()) {}

TaskHead& MedusaModel::add_head(const TaskSpec& spec, HeadKind kind, bool sfa_enabled) {
    if (has_head(spec.name)) throw ValueError("head already exists for task " + spec.name);
    Rng rng(seed_for(seed_, "head." + spec.name));
    heads_.push_back(std::make_unique<TaskHead>(spec, cfg_, kind, sfa_enabled, rng));
    return *heads_.back();
}

bool MedusaModel::has_head(const std::string& task) const {
    for (const auto& h : heads_)
        if (h->spec().name == task) return true;
    return false;
}

TaskHead& MedusaModel::head(const std::string& task) {
    for (auto& h : heads_)
        if (h->spec().name == task) return *h;
    throw ValueError("no head for task " + task);
}

ModuleState MedusaModel::state() {
    ModuleState st;
    backbone_.collect(st);
    for (auto& h : heads_) h->collect(st);
    return st;
}

ModuleState MedusaModel::backbone_state() {
    ModuleState st;
    backbone_.collect(st);
    return st;
}

ModuleState MedusaModel::head_state(const std::string& task) {
    ModuleState st;
    head(task).collect(st);
    return st;
}

void MedusaModel::freeze_backbone_and_heads() {
    ModuleState st = state();
    freeze_module(st);
}

bool MedusaModel::backbone_frozen() const {
    ModuleState st;
    const_cast<Backbone&>(backbone_).collect(st);
    for (const Parameter* p : st.params)
        if (!p->frozen) return false;
    return true;
}

std::size_t MedusaModel::param_count() {
    std::size_t n = backbone_.param_count();
    for (const auto& h : heads_) n += h->param_count();
    return n;
}

}  // namespace medusa

#pragma once

#include <map>
#include <string>
#include <vector>

#include "medusa/data.hpp"
#include "medusa/losses.hpp"
#include "medusa/metrics.hpp"
#include "medusa/model.hpp"
#include "medusa/optim.hpp"

namespace medusa {

struct TrainConfig {
    int epochs = 30;
    double base_lr = 1e-3;
    double backbone_lr_scale = 0.1;  // backbone trains slower than the heads
    double poly_power = 0.9;
    int batch_size = 8;
    std::uint64_t seed = 1;
    double intermediate_loss_weight = 1.0;
    std::map<std::string, double> task_loss_weights;  // absent -> 1.0

    void validate() const;
    double weight_for(const std::string& task) const;
};

struct ReportRow {
    int epoch;
    std::string task;
    std::string split;
    double loss = 0.0;
    double metric = 0.0;
    bool has_loss = false;
    bool has_metric = false;
};

struct TaskEval {
    TaskSpec spec;
    double loss = 0.0;
    double metric = 0.0;
};

struct TrainReport {
    std::vector<ReportRow> rows;  // per-epoch train losses, then final eval
    std::vector<TaskEval> val_results;
    std::vector<TaskEval> test_results;
};

// Batch assembly: images as N x 3 x S x S, labels per task. Dense targets
// and integer label maps are mutually exclusive per task.
struct TaskTarget {
    Tensor dense;
    std::vector<int> labels;
};

Tensor stack_images(const std::vector<Sample>& batch);
TaskTarget make_target(const TaskSpec& spec, const std::vector<Sample>& batch);
Tensor task_loss(const TaskSpec& spec, const Tensor& pred, const TaskTarget& target);

// Deterministic full-split evaluation (eval mode, no tape).
std::vector<TaskEval> evaluate(MedusaModel& model, const std::vector<std::string>& tasks,
                               const Dataset& data, const std::string& split, int batch_size);

// Joint optimization of all listed tasks: one backbone pass per batch, one
// summed loss, one Adam step. Per-scale initial predictions contribute
// intermediate_loss_weight times their loss.
TrainReport train_multitask(MedusaModel& model, const std::vector<std::string>& tasks,
                            const Dataset& data, const TrainConfig& config);

// Freezes the backbone and all existing heads (including BN statistics).
void freeze_backbone(MedusaModel& model);

// Attaches a head for an unseen task to a frozen backbone and trains only
// that head. Existing tasks are untouched bit for bit.
TrainReport attach_and_train_head(MedusaModel& model, const TaskSpec& new_task, HeadKind kind,
                                  bool sfa_enabled, const Dataset& data, const TrainConfig& config);

}  // namespace medusa

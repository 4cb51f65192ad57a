#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medusa/checkpoint.hpp"
#include "medusa/config.hpp"
#include "medusa/model.hpp"
#include "medusa/train.hpp"

namespace medusa {

// Exclusive ownership of an output directory while artifacts are written.
class DirLock {
  public:
    explicit DirLock(const std::string& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    std::string path_;
};

MedusaModel build_model(const ExperimentConfig& cfg);
void save_model(MedusaModel& model, const ExperimentConfig& cfg, const std::string& path);
// Rebuilds the model from the config text embedded in the checkpoint.
MedusaModel load_model(const std::string& checkpoint_path, ExperimentConfig& cfg_out);

struct TrainArtifacts {
    std::string checkpoint_path;
    std::string report_path;
    std::string metrics_val_path;
    std::string metrics_test_path;
    TrainReport report;
};

struct EvalArtifacts {
    std::string metrics_path;
    std::optional<std::string> delta_path;
    std::vector<TaskEval> results;
    std::optional<MtlDelta> delta;
};

struct TransferArtifacts {
    std::string checkpoint_path;
    std::string report_path;
    std::string metrics_before_path;
    std::string metrics_after_path;
    TrainReport report;
    std::vector<TaskEval> prior_before;
    std::vector<TaskEval> prior_after;
    std::vector<TaskEval> new_task_results;
};

struct ResourceRow {
    int tasks;
    std::size_t params_medusa;
    std::size_t params_st;
    std::size_t params_pairwise;
};

struct ResourcesArtifacts {
    std::string csv_path;
    std::vector<ResourceRow> rows;
    int st_crossover_tasks;  // -1 when none within the sweep
};

TrainArtifacts cmd_train(const ExperimentConfig& cfg);

// Evaluates a checkpoint on one split; when a baseline metrics CSV is given,
// also emits the delta report against it.
EvalArtifacts cmd_eval(const std::string& checkpoint_path, const std::string& split,
                       const std::string& out_dir, const std::string& baseline_csv = "");

// Freezes everything in the checkpoint, attaches a head for new_task and
// trains it with cfg's recipe/data. Prior tasks must evaluate identically
// before and after; both evaluations are written out.
TransferArtifacts cmd_transfer(const std::string& checkpoint_path, const std::string& new_task,
                               const ExperimentConfig& cfg);

// Parameter-count sweep over task count: this architecture (shared backbone
// + independent heads), single-task expert networks, and a stylized
// pairwise-connection model that grows quadratically.
ResourcesArtifacts cmd_resources(const ExperimentConfig& cfg, int max_tasks);

std::string metric_kind_str(MetricKind k);
std::vector<TaskPerformance> read_metrics_csv(const std::string& path);

}  // namespace medusa

#include <CLI11.hpp>

#include <iostream>

#include "medusa/experiments.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string tasks;
    std::string head_kind;
    std::string sfa;
    std::string out_dir;
    long long seed = -1;
    int epochs = -1;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config_path, "config file (key = value with [section] headers)");
    app->add_option("--tasks", f.tasks, "comma-separated task roster");
    app->add_option("--head", f.head_kind, "head kind: msa or hrhead")
        ->check(CLI::IsMember({"msa", "hrhead"}));
    app->add_option("--sfa", f.sfa, "shared feature attention: on or off")
        ->check(CLI::IsMember({"on", "off"}));
    app->add_option("--seed", f.seed, "training seed");
    app->add_option("--epochs", f.epochs, "training epochs");
    app->add_option("--out", f.out_dir, "output directory");
}

medusa::ExperimentConfig resolve(const CommonFlags& f) {
    medusa::KvMap kv;
    if (!f.config_path.empty()) kv = medusa::load_kv_file(f.config_path);
    if (!f.tasks.empty()) kv["experiment.tasks"] = f.tasks;
    if (!f.head_kind.empty()) kv["experiment.head_kind"] = f.head_kind;
    if (!f.sfa.empty()) kv["experiment.sfa"] = f.sfa;
    if (!f.out_dir.empty()) kv["experiment.out_dir"] = f.out_dir;
    if (f.seed >= 0) kv["train.seed"] = std::to_string(f.seed);
    if (f.epochs >= 0) kv["train.epochs"] = std::to_string(f.epochs);
    return medusa::ExperimentConfig::from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-task dense prediction on a procedural benchmark"};
    app.require_subcommand(1);

    CommonFlags train_flags, transfer_flags, resources_flags;
    std::string eval_checkpoint, eval_split = "test", eval_out = "out/eval", eval_baseline;
    std::string transfer_checkpoint, transfer_task;
    int max_tasks = 6;

    CLI::App* train = app.add_subcommand("train", "train a model and write checkpoint + reports");
    add_common(train, train_flags);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
    eval->add_option("--split", eval_split, "train, val or test")
        ->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--baseline", eval_baseline,
                     "single-task baseline metrics CSV; adds the delta report");

    CLI::App* transfer = app.add_subcommand("transfer", "freeze a checkpoint and train a new head");
    transfer->add_option("--checkpoint", transfer_checkpoint, "source checkpoint")->required();
    transfer->add_option("--task", transfer_task, "new task name")->required();
    add_common(transfer, transfer_flags);

    CLI::App* resources = app.add_subcommand("resources", "parameter scaling report");
    resources->add_option("--max-tasks", max_tasks, "largest task count in the sweep");
    add_common(resources, resources_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const auto art = medusa::cmd_train(resolve(train_flags));
            std::cout << "checkpoint: " << art.checkpoint_path << "\n"
                      << "report:     " << art.report_path << "\n";
            for (const auto& e : art.report.test_results)
                std::cout << "test " << e.spec.name << " "
                          << medusa::metric_kind_str(e.spec.metric_kind) << " = " << e.metric << "\n";
        } else if (eval->parsed()) {
            const auto art = medusa::cmd_eval(eval_checkpoint, eval_split, eval_out, eval_baseline);
            std::cout << "metrics: " << art.metrics_path << "\n";
            for (const auto& e : art.results)
                std::cout << eval_split << " " << e.spec.name << " "
                          << medusa::metric_kind_str(e.spec.metric_kind) << " = " << e.metric << "\n";
            if (art.delta)
                std::cout << "delta_mtl aggregate = " << 100.0 * art.delta->aggregate << "%\n";
        } else if (transfer->parsed()) {
            if (!transfer_flags.tasks.empty())
                throw medusa::ValueError("transfer takes --task, not --tasks");
            // the roster slot carries the new head's kind/sfa settings
            transfer_flags.tasks = transfer_task;
            const medusa::ExperimentConfig cfg = resolve(transfer_flags);
            const auto art = medusa::cmd_transfer(transfer_checkpoint, transfer_task, cfg);
            std::cout << "checkpoint: " << art.checkpoint_path << "\n";
            for (const auto& e : art.new_task_results)
                std::cout << "test " << e.spec.name << " "
                          << medusa::metric_kind_str(e.spec.metric_kind) << " = " << e.metric << "\n";
        } else if (resources->parsed()) {
            const auto art = medusa::cmd_resources(resolve(resources_flags), max_tasks);
            std::cout << "resources: " << art.csv_path << "\n"
                      << "st crossover at T = " << art.st_crossover_tasks << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

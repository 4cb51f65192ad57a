#include "medusa/experiments.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace medusa {
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw StateError("cannot write " + path);
    f << content;
}

std::string report_csv(const TrainReport& report, const std::string& hash) {
    std::ostringstream os;
    os << "# config_hash=" << hash << "\n";
    os << "epoch,task,split,loss,metric\n";
    for (const ReportRow& r : report.rows) {
        os << r.epoch << ',' << r.task << ',' << r.split << ','
           << (r.has_loss ? fmt(r.loss) : "") << ',' << (r.has_metric ? fmt(r.metric) : "") << "\n";
    }
    return os.str();
}

std::string metrics_csv(const std::vector<TaskEval>& results, const std::string& hash) {
    std::ostringstream os;
    os << "# config_hash=" << hash << "\n";
    os << "task,metric_kind,value\n";
    for (const TaskEval& e : results)
        os << e.spec.name << ',' << metric_kind_str(e.spec.metric_kind) << ',' << fmt(e.metric) << "\n";
    return os.str();
}

}  // namespace

std::string metric_kind_str(MetricKind k) {
    switch (k) {
        case MetricKind::Rmse: return "rmse";
        case MetricKind::MIoU: return "miou";
        case MetricKind::BceError: return "bce_error";
    }
    throw ValueError("unhandled metric kind");
}

DirLock::DirLock(const std::string& dir) {
    fs::create_directories(dir);
    path_ = (fs::path(dir) / ".lock").string();
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
        throw StateError("output directory " + dir +
                         " is locked by another experiment (remove .lock if stale)");
    std::fclose(f);
}

DirLock::~DirLock() { std::remove(path_.c_str()); }

MedusaModel build_model(const ExperimentConfig& cfg) {
    cfg.validate();
    MedusaModel model(cfg.backbone, cfg.train.seed);
    for (const HeadSetting& h : cfg.heads)
        model.add_head(task_spec_by_name(h.task), h.kind, h.sfa);
    return model;
}

void save_model(MedusaModel& model, const ExperimentConfig& cfg, const std::string& path) {
    ModuleState st = model.state();
    snapshot_state(st, cfg.to_text()).save(path);
}

MedusaModel load_model(const std::string& checkpoint_path, ExperimentConfig& cfg_out) {
    const Archive archive = Archive::load(checkpoint_path);
    try {
        cfg_out = ExperimentConfig::from_text(archive.metadata);
    } catch (const std::exception& e) {
        throw CheckpointError("checkpoint " + checkpoint_path +
                              " has an unreadable embedded config: " + e.what());
    }
    MedusaModel model = build_model(cfg_out);
    ModuleState st = model.state();
    restore_state(archive, st);
    return model;
}

TrainArtifacts cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    DirLock lock(cfg.out_dir);
    const std::string hash = config_hash_hex(cfg);

    MedusaModel model = build_model(cfg);
    const Dataset data = cfg.make_dataset();
    TrainArtifacts art;
    art.report = train_multitask(model, cfg.task_names(), data, cfg.train);

    const fs::path out(cfg.out_dir);
    art.checkpoint_path = (out / "checkpoint.bin").string();
    art.report_path = (out / "train_report.csv").string();
    art.metrics_val_path = (out / "metrics_val.csv").string();
    art.metrics_test_path = (out / "metrics_test.csv").string();
    save_model(model, cfg, art.checkpoint_path);
    write_file(art.report_path, report_csv(art.report, hash));
    write_file(art.metrics_val_path, metrics_csv(art.report.val_results, hash));
    write_file(art.metrics_test_path, metrics_csv(art.report.test_results, hash));
    return art;
}

std::vector<TaskPerformance> read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValueError("cannot open metrics file " + path);
    std::vector<TaskPerformance> out;
    std::string line;
    bool header_seen = false;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // task,metric_kind,value
            continue;
        }
        std::istringstream ls(line);
        std::string task, kind, value;
        if (!std::getline(ls, task, ',') || !std::getline(ls, kind, ',') || !std::getline(ls, value))
            throw ValueError("malformed metrics row in " + path + ": " + line);
        TaskPerformance p;
        p.task = task_spec_by_name(task);
        p.value = std::stod(value);
        out.push_back(std::move(p));
    }
    return out;
}

EvalArtifacts cmd_eval(const std::string& checkpoint_path, const std::string& split,
                       const std::string& out_dir, const std::string& baseline_csv) {
    ExperimentConfig cfg;
    MedusaModel model = load_model(checkpoint_path, cfg);
    DirLock lock(out_dir);
    const Dataset data = cfg.make_dataset();
    const std::string hash = config_hash_hex(cfg);

    EvalArtifacts art;
    art.results = evaluate(model, cfg.task_names(), data, split, cfg.train.batch_size);
    art.metrics_path = (fs::path(out_dir) / ("metrics_" + split + ".csv")).string();
    write_file(art.metrics_path, metrics_csv(art.results, hash));

    if (!baseline_csv.empty()) {
        const auto baseline = read_metrics_csv(baseline_csv);
        std::vector<TaskPerformance> mt, bl;
        for (const TaskEval& e : art.results) {
            for (const TaskPerformance& b : baseline) {
                if (b.task.name == e.spec.name) {
                    mt.push_back({e.spec, e.metric});
                    bl.push_back(b);
                    break;
                }
            }
        }
        if (mt.empty())
            throw ValueError("baseline " + baseline_csv + " shares no tasks with the checkpoint");
        art.delta = delta_mtl(mt, bl);

        std::ostringstream os;
        os << "# config_hash=" << hash << "\n";
        os << "task,baseline,multitask,relative_pct\n";
        for (std::size_t i = 0; i < mt.size(); ++i)
            os << mt[i].task.name << ',' << fmt(bl[i].value) << ',' << fmt(mt[i].value) << ','
               << fmt(100.0 * art.delta->per_task_relative[i]) << "\n";
        os << "aggregate,,," << fmt(100.0 * art.delta->aggregate) << "\n";
        art.delta_path = (fs::path(out_dir) / ("delta_mtl_" + split + ".csv")).string();
        write_file(*art.delta_path, os.str());
    }
    return art;
}

TransferArtifacts cmd_transfer(const std::string& checkpoint_path, const std::string& new_task,
                               const ExperimentConfig& cfg) {
    ExperimentConfig base_cfg;
    MedusaModel model = load_model(checkpoint_path, base_cfg);
    if (model.has_head(new_task))
        throw ValueError("task " + new_task + " is already in the checkpoint's roster");
    DirLock lock(cfg.out_dir);

    // combined roster: prior tasks keep their settings, the new head takes
    // the transfer config's defaults
    HeadSetting new_head;
    new_head.task = new_task;
    new_head.kind = HeadKind::Msa;
    new_head.sfa = true;
    for (const HeadSetting& h : cfg.heads) {
        if (h.task == new_task) {
            new_head = h;
            break;
        }
    }

    ExperimentConfig combined = base_cfg;
    combined.heads.push_back(new_head);
    combined.scenario = cfg.scenario;
    combined.out_dir = cfg.out_dir;
    combined.train = cfg.train;
    combined.scene = cfg.scene;
    combined.data_seed = cfg.data_seed;
    combined.n_train = cfg.n_train;
    combined.n_val = cfg.n_val;
    combined.n_test = cfg.n_test;
    const std::string hash = config_hash_hex(combined);

    const Dataset data = combined.make_dataset();
    const std::vector<std::string> prior_tasks = base_cfg.task_names();

    TransferArtifacts art;
    art.prior_before = evaluate(model, prior_tasks, data, "test", combined.train.batch_size);

    freeze_backbone(model);
    art.report = attach_and_train_head(model, task_spec_by_name(new_task), new_head.kind,
                                       new_head.sfa, data, combined.train);
    art.prior_after = evaluate(model, prior_tasks, data, "test", combined.train.batch_size);
    art.new_task_results = art.report.test_results;

    const fs::path out(cfg.out_dir);
    art.checkpoint_path = (out / "checkpoint.bin").string();
    art.report_path = (out / "transfer_report.csv").string();
    art.metrics_before_path = (out / "metrics_before.csv").string();
    art.metrics_after_path = (out / "metrics_after.csv").string();
    save_model(model, combined, art.checkpoint_path);
    write_file(art.report_path, report_csv(art.report, hash));
    write_file(art.metrics_before_path, metrics_csv(art.prior_before, hash));
    write_file(art.metrics_after_path, metrics_csv(art.prior_after, hash));
    return art;
}

ResourcesArtifacts cmd_resources(const ExperimentConfig& cfg, int max_tasks) {
    cfg.validate();
    if (max_tasks < 1) throw ValueError("cmd_resources: max_tasks must be >= 1");
    DirLock lock(cfg.out_dir);

    Rng rng(seed_for(cfg.train.seed, "backbone"));
    Backbone backbone(cfg.backbone, rng);
    const std::size_t backbone_params = backbone.param_count();
    const HeadSetting& rep = cfg.heads.front();
    const std::size_t head_params =
        head_param_count(cfg.backbone, task_spec_by_name(rep.task), rep.kind, rep.sfa);
    const std::size_t pair_block = pair_block_param_count(cfg.backbone);

    ResourcesArtifacts art;
    art.st_crossover_tasks = -1;
    for (int t = 1; t <= max_tasks; ++t) {
        ResourceRow row;
        row.tasks = t;
        row.params_medusa = backbone_params + std::size_t(t) * head_params;
        row.params_st = std::size_t(t) * (backbone_params + head_params);
        row.params_pairwise = backbone_params + std::size_t(t) * head_params +
                              std::size_t(t) * std::size_t(t - 1) * pair_block;
        if (art.st_crossover_tasks < 0 && row.params_pairwise > row.params_st)
            art.st_crossover_tasks = t;
        art.rows.push_back(row);
    }

    std::ostringstream os;
    os << "# config_hash=" << config_hash_hex(cfg) << "\n";
    os << "# pairwise column: stylized model with one attention block per ordered task pair,"
          " not a reimplementation of any published system\n";
    os << "# st_crossover_tasks=" << art.st_crossover_tasks << "\n";
    os << "T,params_medusa,params_st,params_pairwise\n";
    for (const ResourceRow& r : art.rows)
        os << r.tasks << ',' << r.params_medusa << ',' << r.params_st << ',' << r.params_pairwise
           << "\n";
    art.csv_path = (fs::path(cfg.out_dir) / "resources.csv").string();
    write_file(art.csv_path, os.str());
    return art;
}

}  // namespace medusa

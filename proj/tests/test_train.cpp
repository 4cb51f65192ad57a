#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "medusa/experiments.hpp"

using namespace medusa;
namespace fs = std::filesystem;

namespace {

// small enough to train in seconds
ExperimentConfig tiny_config(const std::string& tasks, const std::string& out_dir) {
    KvMap kv;
    kv["experiment.tasks"] = tasks;
    kv["experiment.out_dir"] = out_dir;
    kv["backbone.scales"] = "4,8";
    kv["backbone.channels"] = "4,6";
    kv["backbone.stem_channels"] = "4";
    kv["data.image_size"] = "16";
    kv["data.n_train"] = "16";
    kv["data.n_val"] = "4";
    kv["data.n_test"] = "4";
    kv["train.epochs"] = "2";
    kv["train.batch_size"] = "4";
    kv["train.base_lr"] = "1e-3";
    kv["train.seed"] = "3";
    return ExperimentConfig::from_kv(kv);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("single-task training runs and reports") {
    const auto dir = fresh_dir("medusa_train_single");
    ExperimentConfig cfg = tiny_config("depth", dir.string());
    cfg.train.epochs = 4;
    const TrainArtifacts art = cmd_train(cfg);

    REQUIRE_FALSE(art.report.rows.empty());
    double first = -1.0, last = -1.0;
    for (const ReportRow& r : art.report.rows) {
        if (r.split != "train") continue;
        if (first < 0.0) first = r.loss;
        last = r.loss;
    }
    CHECK(last < first);  // learning happened
    CHECK(fs::exists(art.checkpoint_path));
    CHECK(fs::exists(art.report_path));
    REQUIRE(art.report.test_results.size() == 1);
    CHECK(art.report.test_results[0].spec.name == "depth");
    CHECK(art.report.test_results[0].metric > 0.0);
    fs::remove_all(dir);
}

TEST_CASE("identical configs produce byte-identical artifacts") {
    const auto dir1 = fresh_dir("medusa_det_a");
    const auto dir2 = fresh_dir("medusa_det_b");
    ExperimentConfig c1 = tiny_config("depth,segm", dir1.string());
    ExperimentConfig c2 = tiny_config("depth,segm", dir2.string());
    const TrainArtifacts a1 = cmd_train(c1);
    const TrainArtifacts a2 = cmd_train(c2);

    CHECK(slurp(a1.report_path) == slurp(a2.report_path));
    CHECK(slurp(a1.metrics_test_path) == slurp(a2.metrics_test_path));
    // checkpoints differ only in the embedded out_dir, so compare entries
    const Archive k1 = Archive::load(a1.checkpoint_path);
    const Archive k2 = Archive::load(a2.checkpoint_path);
    REQUIRE(k1.entries.size() == k2.entries.size());
    for (std::size_t i = 0; i < k1.entries.size(); ++i) {
        CHECK(k1.entries[i].name == k2.entries[i].name);
        CHECK(std::memcmp(k1.entries[i].data.data(), k2.entries[i].data.data(),
                          k1.entries[i].data.size() * sizeof(double)) == 0);
    }
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("per-task losses do not depend on roster order") {
    const auto dir1 = fresh_dir("medusa_order_a");
    const auto dir2 = fresh_dir("medusa_order_b");
    ExperimentConfig c1 = tiny_config("depth,segm", dir1.string());
    ExperimentConfig c2 = tiny_config("segm,depth", dir2.string());
    // one step per epoch so the reported loss is the step-0 loss exactly
    c1.train.epochs = 1;
    c2.train.epochs = 1;
    c1.n_train = 4;
    c2.n_train = 4;
    const TrainArtifacts a1 = cmd_train(c1);
    const TrainArtifacts a2 = cmd_train(c2);
    auto loss_of = [](const TrainReport& r, const std::string& task) {
        for (const ReportRow& row : r.rows)
            if (row.split == "train" && row.task == task) return row.loss;
        REQUIRE(false);
        return 0.0;
    };
    // first epoch: parameters identical (per-head seeding), so per-task
    // losses must match bit for bit
    CHECK(loss_of(a1.report, "depth") == loss_of(a2.report, "depth"));
    CHECK(loss_of(a1.report, "segm") == loss_of(a2.report, "segm"));
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("training is bit-identical across kernel backends") {
    if (!kernels::avx2_available()) return;
    auto run = [](kernels::Backend b) {
        REQUIRE(kernels::select(b));
        ExperimentConfig cfg = tiny_config("depth", "unused_kb");
        MedusaModel model = build_model(cfg);
        const Dataset data = cfg.make_dataset();
        train_multitask(model, {"depth"}, data, cfg.train);
        ModuleState st = model.state();
        return snapshot_state(st);
    };
    const Archive scalar_run = run(kernels::Backend::Scalar);
    const Archive avx2_run = run(kernels::Backend::Avx2);
    REQUIRE(scalar_run.entries.size() == avx2_run.entries.size());
    for (std::size_t i = 0; i < scalar_run.entries.size(); ++i) {
        CHECK(std::memcmp(scalar_run.entries[i].data.data(), avx2_run.entries[i].data.data(),
                          scalar_run.entries[i].data.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("zero intermediate loss weight still trains cleanly") {
    // init-prediction convs only feed intermediate losses; with weight 0
    // they must still receive (zero) gradients rather than tripping the
    // missing-gradient check
    const auto dir = fresh_dir("medusa_lambda0");
    ExperimentConfig cfg = tiny_config("depth", dir.string());
    cfg.train.intermediate_loss_weight = 0.0;
    MedusaModel model = build_model(cfg);
    const Dataset data = cfg.make_dataset();
    const TrainReport report = train_multitask(model, {"depth"}, data, cfg.train);
    REQUIRE_FALSE(report.rows.empty());
    ModuleState st = model.state();
    for (Parameter* p : st.params)
        for (double v : p->tensor.data()) REQUIRE(std::isfinite(v));
    fs::remove_all(dir);
}

TEST_CASE("backbone_lr_scale zero pins the backbone while heads move") {
    const auto dir = fresh_dir("medusa_lr_scale");
    ExperimentConfig cfg = tiny_config("depth", dir.string());
    cfg.train.backbone_lr_scale = 0.0;

    MedusaModel model = build_model(cfg);
    const Dataset data = cfg.make_dataset();
    ModuleState bb = model.backbone_state();
    std::vector<std::vector<double>> before;
    for (Parameter* p : bb.params) before.emplace_back(p->tensor.data().begin(), p->tensor.data().end());
    ModuleState head = model.head_state("depth");
    std::vector<double> head_before(head.params[0]->tensor.data().begin(),
                                    head.params[0]->tensor.data().end());

    train_multitask(model, {"depth"}, data, cfg.train);

    for (std::size_t i = 0; i < bb.params.size(); ++i) {
        const auto d = bb.params[i]->tensor.data();
        CHECK(std::memcmp(before[i].data(), d.data(), d.size() * sizeof(double)) == 0);
    }
    bool head_moved = false;
    const auto hd = head.params[0]->tensor.data();
    for (std::size_t i = 0; i < hd.size(); ++i) head_moved = head_moved || hd[i] != head_before[i];
    CHECK(head_moved);
    fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with a divergence error") {
    const auto dir = fresh_dir("medusa_diverge");
    ExperimentConfig cfg = tiny_config("depth", dir.string());
    // a poisoned loss weight stands in for a numeric blow-up
    cfg.train.task_loss_weights["depth"] = std::numeric_limits<double>::quiet_NaN();
    MedusaModel model = build_model(cfg);
    const Dataset data = cfg.make_dataset();
    CHECK_THROWS_AS(train_multitask(model, {"depth"}, data, cfg.train), DivergedError);
    fs::remove_all(dir);
}

TEST_CASE("freeze_backbone freezes everything present and is idempotent") {
    ExperimentConfig cfg = tiny_config("depth,segm", "unused");
    MedusaModel model = build_model(cfg);
    CHECK_FALSE(model.backbone_frozen());
    freeze_backbone(model);
    CHECK(model.backbone_frozen());
    ModuleState st = model.state();
    for (Parameter* p : st.params) CHECK(p->frozen);
    freeze_backbone(model);  // second call is a no-op
    CHECK(model.backbone_frozen());
}

TEST_CASE("attach_and_train_head contracts") {
    ExperimentConfig cfg = tiny_config("depth", "unused2");
    MedusaModel model = build_model(cfg);
    const Dataset data = cfg.make_dataset();

    SUBCASE("requires a frozen backbone") {
        CHECK_THROWS_AS(attach_and_train_head(model, task_spec_by_name("saliency"), HeadKind::Msa,
                                              true, data, cfg.train),
                        StateError);
    }
    SUBCASE("rejects name collisions") {
        freeze_backbone(model);
        CHECK_THROWS_AS(attach_and_train_head(model, task_spec_by_name("depth"), HeadKind::Msa,
                                              true, data, cfg.train),
                        ValueError);
    }
}

TEST_CASE("transfer leaves the backbone and prior tasks untouched") {
    const auto dir = fresh_dir("medusa_transfer_src");
    const auto tdir = fresh_dir("medusa_transfer_dst");
    ExperimentConfig cfg = tiny_config("depth,segm", dir.string());
    const TrainArtifacts trained = cmd_train(cfg);

    ExperimentConfig tcfg = tiny_config("saliency", tdir.string());
    tcfg.train.epochs = 2;
    const TransferArtifacts art = cmd_transfer(trained.checkpoint_path, "saliency", tcfg);

    // backbone and prior-head bytes identical between the two checkpoints
    const Archive before = Archive::load(trained.checkpoint_path);
    const Archive after = Archive::load(art.checkpoint_path);
    std::size_t compared = 0;
    for (const ArchiveEntry& e : before.entries) {
        const ArchiveEntry* e2 = after.find(e.name);
        REQUIRE(e2 != nullptr);
        CHECK(std::memcmp(e.data.data(), e2->data.data(), e.data.size() * sizeof(double)) == 0);
        ++compared;
    }
    CHECK(compared == before.entries.size());
    CHECK(after.entries.size() > before.entries.size());  // the new head

    // prior-task metrics bit-identical before and after
    REQUIRE(art.prior_before.size() == art.prior_after.size());
    for (std::size_t i = 0; i < art.prior_before.size(); ++i) {
        CHECK(art.prior_before[i].spec.name == art.prior_after[i].spec.name);
        CHECK(std::memcmp(&art.prior_before[i].metric, &art.prior_after[i].metric,
                          sizeof(double)) == 0);
    }

    // the transferred head must actually exist and evaluate
    REQUIRE(art.new_task_results.size() == 1);
    CHECK(art.new_task_results[0].spec.name == "saliency");

    SUBCASE("transferring an existing task fails") {
        const auto tdir2 = fresh_dir("medusa_transfer_dup");
        ExperimentConfig dup = tiny_config("depth", tdir2.string());
        CHECK_THROWS_AS(cmd_transfer(trained.checkpoint_path, "depth", dup), ValueError);
        fs::remove_all(tdir2);
    }
    fs::remove_all(dir);
    fs::remove_all(tdir);
}

TEST_CASE("sequential and joint head attachment initialize identically") {
    ExperimentConfig cfg = tiny_config("depth", "unused3");
    MedusaModel seq = build_model(cfg);
    seq.add_head(task_spec_by_name("saliency"), HeadKind::Msa, true);
    seq.add_head(task_spec_by_name("parts"), HeadKind::Msa, true);

    MedusaModel joint = build_model(cfg);
    joint.add_head(task_spec_by_name("parts"), HeadKind::Msa, true);  // reversed order
    joint.add_head(task_spec_by_name("saliency"), HeadKind::Msa, true);

    for (const char* task : {"saliency", "parts"}) {
        ModuleState a = seq.head_state(task);
        ModuleState b = joint.head_state(task);
        REQUIRE(a.params.size() == b.params.size());
        for (std::size_t i = 0; i < a.params.size(); ++i) {
            const auto da = a.params[i]->tensor.data();
            const auto db = b.params[i]->tensor.data();
            CHECK(std::memcmp(da.data(), db.data(), da.size() * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("resources report structure") {
    const auto dir = fresh_dir("medusa_resources");
    ExperimentConfig cfg = tiny_config("depth", dir.string());
    const ResourcesArtifacts art = cmd_resources(cfg, 6);
    REQUIRE(art.rows.size() == 6);

    // medusa column affine in T: constant first difference
    const std::size_t d1 = art.rows[1].params_medusa - art.rows[0].params_medusa;
    for (std::size_t t = 1; t < art.rows.size(); ++t)
        CHECK(art.rows[t].params_medusa - art.rows[t - 1].params_medusa == d1);

    // pairwise column: constant second difference equal to 2 * pair_block
    const auto pw = [&](std::size_t t) { return art.rows[t].params_pairwise; };
    const std::size_t second = pw(2) - 2 * pw(1) + pw(0);
    CHECK(second == 2 * pair_block_param_count(cfg.backbone));
    for (std::size_t t = 2; t < art.rows.size(); ++t)
        CHECK(pw(t) - 2 * pw(t - 1) + pw(t - 2) == second);

    // ST baseline loses to the pairwise model somewhere in the sweep
    CHECK(art.st_crossover_tasks > 0);
    CHECK(fs::exists(art.csv_path));
    fs::remove_all(dir);
}

TEST_CASE("output directory lock blocks concurrent writers") {
    const auto dir = fresh_dir("medusa_lock");
    DirLock lock(dir.string());
    CHECK_THROWS_AS(DirLock(dir.string()), StateError);
    fs::remove_all(dir);
}

TEST_CASE("cmd_eval reproduces training metrics and computes deltas") {
    const auto dir = fresh_dir("medusa_eval_src");
    ExperimentConfig cfg = tiny_config("depth,segm", dir.string());
    const TrainArtifacts trained = cmd_train(cfg);

    const auto edir = fresh_dir("medusa_eval_out");
    const EvalArtifacts ev = cmd_eval(trained.checkpoint_path, "test", edir.string());
    REQUIRE(ev.results.size() == 2);
    for (std::size_t i = 0; i < ev.results.size(); ++i)
        CHECK(ev.results[i].metric == trained.report.test_results[i].metric);

    // repeated evaluation is byte-identical
    const auto edir2 = fresh_dir("medusa_eval_out2");
    const EvalArtifacts ev2 = cmd_eval(trained.checkpoint_path, "test", edir2.string());
    CHECK(slurp(ev.metrics_path) == slurp(ev2.metrics_path));

    // self-baseline: aggregate delta is exactly zero
    const auto edir3 = fresh_dir("medusa_eval_delta");
    const EvalArtifacts ev3 = cmd_eval(trained.checkpoint_path, "test", edir3.string(), ev.metrics_path);
    REQUIRE(ev3.delta.has_value());
    CHECK(ev3.delta->aggregate == 0.0);
    for (const auto& d : {edir, edir2, edir3, dir}) fs::remove_all(d);
}

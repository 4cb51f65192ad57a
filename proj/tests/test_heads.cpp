#include <doctest.h>

#include <set>

#include "medusa/model.hpp"

using namespace medusa;

namespace {

BackboneConfig small_cfg() {
    BackboneConfig cfg;
    cfg.scales = {4, 8};
    cfg.channels = {4, 6};
    cfg.stem_channels = 4;
    return cfg;
}

Tensor random_image(Rng& rng, int n, int s) {
    std::vector<double> d(std::size_t(n) * 3 * s * s);
    for (double& v : d) v = rng.uniform(0.0, 1.0);
    return Tensor({n, 3, s, s}, std::move(d));
}

Tensor random_fmap(Rng& rng, Shape shape) {
    std::vector<double> d(shape_numel(shape));
    for (double& v : d) v = rng.uniform(-1.0, 1.0);
    return Tensor(std::move(shape), std::move(d));
}

void zero_params(ModuleState& st) {
    for (Parameter* p : st.params)
        for (double& v : p->tensor.data()) v = 0.0;
}

}  // namespace

TEST_CASE("spatial attention composition") {
    Rng rng(1);
    SpatialAttention sa("sa", 4, rng);

    SUBCASE("zeroed gate branch fixes the gate at one half") {
        ModuleState st;
        sa.conv1.collect(st);
        zero_params(st);  // conv weights, bias, bn gamma/beta all zero
        Rng frng(2);
        Tensor fmap = random_fmap(frng, {2, 4, 6, 6});
        Tensor out = sa.forward(fmap, false);
        Tensor value = sa.conv2.forward(fmap, false);
        for (std::size_t i = 0; i < out.numel(); ++i)
            CHECK(out.data()[i] == doctest::Approx(0.5 * value.data()[i]));
    }
    SUBCASE("zero input with zero biases stays zero") {
        Tensor fmap = Tensor::zeros({1, 4, 6, 6});
        Tensor out = sa.forward(fmap, false);  // eval: BN is affine with beta 0
        for (double v : out.data()) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("output equals the recomputed branch product") {
        Rng frng(3);
        Tensor fmap = random_fmap(frng, {2, 4, 5, 5});
        Tensor out = sa.forward(fmap, false);
        Tensor gate = sigmoid(sa.conv1.forward(fmap, false));
        Tensor value = sa.conv2.forward(fmap, false);
        for (std::size_t i = 0; i < out.numel(); ++i)
            CHECK(out.data()[i] == gate.data()[i] * value.data()[i]);
    }
    SUBCASE("channel mismatch raises") {
        CHECK_THROWS_AS(sa.forward(Tensor::zeros({1, 3, 6, 6}), false), ShapeError);
    }
}

TEST_CASE("gate values stay in [0.5, 1)") {
    Rng rng(5);
    SpatialAttention sa("sa", 6, rng);
    for (int trial = 0; trial < 20; ++trial) {
        Rng frng(100 + std::uint64_t(trial));
        Tensor fmap = random_fmap(frng, {2, 6, 5, 5});
        Tensor gate = sigmoid(sa.conv1.forward(fmap, true));
        for (double g : gate.data()) {
            CHECK(g >= 0.5);
            CHECK(g < 1.0);
        }
    }
}

TEST_CASE("head forward shapes and stages") {
    const BackboneConfig cfg = small_cfg();
    MedusaModel model(cfg, 42);
    model.add_head(task_spec_by_name("depth"), HeadKind::Msa, true);
    model.add_head(task_spec_by_name("segm"), HeadKind::HrHead, true);

    Rng rng(7);
    Tensor img = random_image(rng, 2, 16);
    ScalePyramid pyr = model.extract_features(img, false);

    SUBCASE("per-scale stages preserve shape") {
        TaskHead& head = model.head("depth");
        auto feats = head.apply_sfa(pyr, false);
        REQUIRE(feats.size() == 2);
        CHECK(feats[0].shape() == pyr.features[0].shape());
        CHECK(feats[1].shape() == pyr.features[1].shape());
        auto refined = head.refine(feats, false);
        CHECK(refined[0].shape() == feats[0].shape());
        CHECK(refined[1].shape() == feats[1].shape());
        auto inits = head.initial_predict(refined, true);
        REQUIRE(inits.size() == 2);
        CHECK(inits[0].shape() == Shape{2, 1, 16, 16});  // upsampled to label resolution
        CHECK(inits[1].shape() == Shape{2, 1, 16, 16});
    }
    SUBCASE("segmentation head emits class logits per scale") {
        TaskHead& head = model.head("segm");
        auto refined = head.refine(head.apply_sfa(pyr, false), false);
        auto inits = head.initial_predict(refined, true);
        for (const Tensor& t : inits) CHECK(t.dim(1) == 5);
    }
    SUBCASE("msa and hrhead outputs have identical shapes") {
        TaskOutput msa_out = model.head("depth").forward(pyr, false);
        MedusaModel other(cfg, 42);
        other.add_head(task_spec_by_name("depth"), HeadKind::HrHead, true);
        ScalePyramid pyr2 = other.extract_features(img, false);
        TaskOutput hr_out = other.head("depth").forward(pyr2, false);
        CHECK(msa_out.prediction.shape() == hr_out.prediction.shape());
        CHECK(msa_out.prediction.shape() == Shape{2, 1, 16, 16});
    }
    SUBCASE("combine on the wrong head kind raises") {
        TaskHead& msa_head = model.head("depth");
        TaskHead& hr_head = model.head("segm");
        auto refined = msa_head.refine(msa_head.apply_sfa(pyr, false), false);
        CHECK_THROWS_AS(msa_head.hrhead_combine(refined, false), StateError);
        auto refined2 = hr_head.refine(hr_head.apply_sfa(pyr, false), false);
        CHECK_THROWS_AS(hr_head.msa_combine(refined2, false), StateError);
    }
}

TEST_CASE("residual refinement with zeroed convs is the identity") {
    const BackboneConfig cfg = small_cfg();
    Rng rng(9);
    TaskHead head(task_spec_by_name("depth"), cfg, HeadKind::Msa, true, rng);
    ModuleState st;
    head.collect(st);
    zero_params(st);

    Rng frng(11);
    std::vector<Tensor> feats = {random_fmap(frng, {1, 4, 4, 4}), random_fmap(frng, {1, 6, 2, 2})};
    auto refined = head.refine(feats, false);
    for (std::size_t s = 0; s < feats.size(); ++s)
        for (std::size_t i = 0; i < feats[s].numel(); ++i)
            CHECK(refined[s].data()[i] == doctest::Approx(feats[s].data()[i]));
}

TEST_CASE("initial predictions are training-only work") {
    const BackboneConfig cfg = small_cfg();
    MedusaModel model(cfg, 3);
    model.add_head(task_spec_by_name("depth"), HeadKind::Msa, true);
    Rng rng(13);
    Tensor img = random_image(rng, 1, 16);

    auto tape_ops = [&](bool training) {
        // params require grad, so every op lands on the tape
        Tape tape;
        TapeScope scope(tape);
        ScalePyramid pyr = model.extract_features(img, training);
        TaskOutput out = model.head("depth").forward(pyr, training);
        CHECK(out.initial_preds.empty() == !training);
        return tape.size();
    };
    const std::size_t train_ops = tape_ops(true);
    const std::size_t eval_ops = tape_ops(false);
    CHECK(train_ops > eval_ops);
}

TEST_CASE("parameter name paths are disjoint across heads and within a head") {
    const BackboneConfig cfg = small_cfg();
    MedusaModel model(cfg, 8);
    model.add_head(task_spec_by_name("depth"), HeadKind::Msa, true);
    model.add_head(task_spec_by_name("segm"), HeadKind::Msa, true);

    ModuleState st = model.state();
    std::set<std::string> names;
    for (Parameter* p : st.params) {
        CHECK(names.insert(p->name).second);  // no duplicates anywhere
    }
    // sfa and msa gates are distinct parameter sets
    int sfa = 0, msa = 0;
    for (Parameter* p : st.params) {
        if (p->name.find(".sfa.") != std::string::npos) ++sfa;
        if (p->name.find(".msa.") != std::string::npos) ++msa;
    }
    CHECK(sfa > 0);
    CHECK(msa == sfa);
}

TEST_CASE("head gradient isolation") {
    const BackboneConfig cfg = small_cfg();
    MedusaModel model(cfg, 21);
    model.add_head(task_spec_by_name("depth"), HeadKind::Msa, true);
    model.add_head(task_spec_by_name("segm"), HeadKind::Msa, true);

    Rng rng(22);
    Tensor img = random_image(rng, 2, 16);

    Tape tape;
    TapeScope scope(tape);
    ScalePyramid pyr = model.extract_features(img, true);
    TaskOutput depth_out = model.head("depth").forward(pyr, true);
    TaskOutput segm_out = model.head("segm").forward(pyr, true);
    (void)segm_out;
    backward(sum(depth_out.prediction));

    ModuleState depth_state = model.head_state("depth");
    ModuleState segm_state = model.head_state("segm");
    ModuleState backbone_state = model.backbone_state();

    bool depth_any = false;
    for (Parameter* p : depth_state.params) depth_any = depth_any || p->tensor.has_grad();
    CHECK(depth_any);
    for (Parameter* p : segm_state.params) CHECK_FALSE(p->tensor.has_grad());
    bool backbone_nonzero = false;
    for (Parameter* p : backbone_state.params) {
        if (!p->tensor.has_grad()) continue;
        for (double g : p->tensor.grad()) backbone_nonzero = backbone_nonzero || g != 0.0;
    }
    CHECK(backbone_nonzero);
}

TEST_CASE("head_param_count matches enumeration and structure") {
    const BackboneConfig cfg = small_cfg();
    for (HeadKind kind : {HeadKind::Msa, HeadKind::HrHead}) {
        for (bool sfa : {true, false}) {
            for (const char* task : {"depth", "segm"}) {
                Rng rng(31);
                TaskHead head(task_spec_by_name(task), cfg, kind, sfa, rng);
                ModuleState st;
                head.collect(st);
                std::size_t enumerated = 0;
                for (Parameter* p : st.params) enumerated += p->tensor.numel();
                CHECK(head_param_count(cfg, task_spec_by_name(task), kind, sfa) == enumerated);
                CHECK(head.param_count() == enumerated);
            }
        }
    }

    SUBCASE("hrhead is strictly smaller than msa") {
        CHECK(head_param_count(cfg, task_spec_by_name("depth"), HeadKind::HrHead) <
              head_param_count(cfg, task_spec_by_name("depth"), HeadKind::Msa));
    }
    SUBCASE("out_channels only moves the prediction convs") {
        TaskSpec one = task_spec_by_name("depth");
        TaskSpec six = one;
        six.out_channels = 6;
        six.name = "depth6";
        const std::size_t diff = head_param_count(cfg, six, HeadKind::Msa) -
                                 head_param_count(cfg, one, HeadKind::Msa);
        // five extra channels in every init conv and the fusion conv
        std::size_t expect = 0;
        for (int c : cfg.channels) expect += 5 * std::size_t(c + 1);
        expect += 5 * std::size_t(cfg.channel_sum() + 1);
        CHECK(diff == expect);
    }
}

TEST_CASE("model parameters scale linearly with task count") {
    const BackboneConfig cfg = small_cfg();
    const TaskSpec base = task_spec_by_name("depth");
    std::vector<std::size_t> totals;
    for (int t = 1; t <= 6; ++t) {
        MedusaModel model(cfg, 5);
        for (int i = 0; i < t; ++i) {
            TaskSpec spec = base;
            spec.name = "task" + std::to_string(i);
            model.add_head(spec, HeadKind::Msa, true);
        }
        ModuleState st = model.state();
        std::size_t total = 0;
        for (Parameter* p : st.params) total += p->tensor.numel();
        CHECK(total == model.param_count());
        totals.push_back(total);
    }
    const std::size_t per_task = totals[1] - totals[0];
    for (std::size_t t = 1; t < totals.size(); ++t)
        CHECK(totals[t] - totals[t - 1] == per_task);
}

TEST_CASE("msa and hrhead produce different outputs on random weights") {
    const BackboneConfig cfg = small_cfg();
    Rng rng(17);
    TaskHead msa(task_spec_by_name("depth"), cfg, HeadKind::Msa, true, rng);
    Rng rng2(17);
    TaskHead hr(task_spec_by_name("depth"), cfg, HeadKind::HrHead, true, rng2);

    Rng frng(19);
    std::vector<Tensor> refined = {random_fmap(frng, {1, 4, 4, 4}), random_fmap(frng, {1, 6, 2, 2})};
    Tensor a = msa.msa_combine(refined, false);
    Tensor b = hr.hrhead_combine(refined, false);
    bool differ = false;
    for (std::size_t i = 0; i < a.numel(); ++i) differ = differ || a.data()[i] != b.data()[i];
    CHECK(differ);
}

#include "medusa/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace medusa {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw ValueError("train config: epochs and batch_size must be positive");
    if (base_lr <= 0.0 || backbone_lr_scale < 0.0) throw ValueError("train config: bad learning rates");
    if (poly_power <= 0.0) throw ValueError("train config: poly_power must be > 0");
    if (intermediate_loss_weight < 0.0) throw ValueError("train config: negative intermediate loss weight");
    for (const auto& [task, w] : task_loss_weights)
        if (w < 0.0) throw ValueError("train config: negative loss weight for " + task);
}

double TrainConfig::weight_for(const std::string& task) const {
    auto it = task_loss_weights.find(task);
    return it == task_loss_weights.end() ? 1.0 : it->second;
}

Tensor stack_images(const std::vector<Sample>& batch) {
    if (batch.empty()) throw DataError("empty batch");
    const int s = batch[0].size;
    const std::size_t per = std::size_t(3) * s * s;
    std::vector<double> data;
    data.reserve(per * batch.size());
    for (const Sample& smp : batch) {
        if (smp.size != s || smp.image.size() != per) throw DataError("inconsistent sample sizes in batch");
        data.insert(data.end(), smp.image.begin(), smp.image.end());
    }
    return Tensor({int(batch.size()), 3, s, s}, std::move(data));
}

namespace {

Tensor stack_dense(const std::vector<Sample>& batch, const std::vector<double> Sample::*field,
                   int channels) {
    const int s = batch[0].size;
    const std::size_t per = std::size_t(channels) * s * s;
    std::vector<double> data;
    data.reserve(per * batch.size());
    for (const Sample& smp : batch) {
        const auto& v = smp.*field;
        if (v.size() != per) throw DataError("sample label has unexpected size");
        data.insert(data.end(), v.begin(), v.end());
    }
    return Tensor({int(batch.size()), channels, s, s}, std::move(data));
}

std::vector<int> stack_labels(const std::vector<Sample>& batch,
                              const std::vector<int> Sample::*field) {
    std::vector<int> out;
    for (const Sample& smp : batch) {
        const auto& v = smp.*field;
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace

TaskTarget make_target(const TaskSpec& spec, const std::vector<Sample>& batch) {
    if (batch.empty()) throw DataError("empty batch");
    TaskTarget t;
    if (spec.name == "depth") t.dense = stack_dense(batch, &Sample::depth, 1);
    else if (spec.name == "normals") t.dense = stack_dense(batch, &Sample::normals, 3);
    else if (spec.name == "edges") t.dense = stack_dense(batch, &Sample::edges, 1);
    else if (spec.name == "saliency") t.dense = stack_dense(batch, &Sample::saliency, 1);
    else if (spec.name == "segm") t.labels = stack_labels(batch, &Sample::segm);
    else if (spec.name == "parts") t.labels = stack_labels(batch, &Sample::parts);
    else throw DataError("no labels available for task " + spec.name);
    return t;
}

Tensor task_loss(const TaskSpec& spec, const Tensor& pred, const TaskTarget& target) {
    switch (spec.loss_kind) {
        case LossKind::L1:
            return l1_loss(pred, target.dense);
        case LossKind::CrossEntropy:
            return cross_entropy(pred, target.labels);
        case LossKind::WeightedBce:
            return weighted_bce(pred, target.dense, spec.pos_weight);
    }
    throw ValueError("unhandled loss kind");
}

namespace {

// per-pixel class decisions: argmax over channels, or thresholded logit for
// single-channel tasks
std::vector<int> predicted_labels(const Tensor& pred) {
    const int n = pred.dim(0), k = pred.dim(1), h = pred.dim(2), w = pred.dim(3);
    const std::size_t hw = std::size_t(h) * w;
    std::vector<int> out(std::size_t(n) * hw);
    for (int ni = 0; ni < n; ++ni) {
        for (std::size_t p = 0; p < hw; ++p) {
            const double* base = pred.data().data() + std::size_t(ni) * k * hw + p;
            if (k == 1) {
                out[std::size_t(ni) * hw + p] = base[0] > 0.0 ? 1 : 0;
            } else {
                int best = 0;
                double bv = base[0];
                for (int c = 1; c < k; ++c) {
                    const double v = base[std::size_t(c) * hw];
                    if (v > bv) {
                        bv = v;
                        best = c;
                    }
                }
                out[std::size_t(ni) * hw + p] = best;
            }
        }
    }
    return out;
}

std::vector<int> target_labels(const TaskTarget& target) {
    if (!target.labels.empty()) return target.labels;
    // binary dense target -> {0,1} labels
    std::vector<int> out(target.dense.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = target.dense.data()[i] > 0.5 ? 1 : 0;
    return out;
}

struct MetricState {
    RmseAccumulator rmse;
    BceAccumulator bce;
    ConfusionAccumulator confusion{2};

    explicit MetricState(const TaskSpec& spec)
        : confusion(spec.out_channels == 1 ? 2 : spec.out_channels) {}
};

void accumulate_metric(const TaskSpec& spec, const Tensor& pred, const TaskTarget& target,
                       MetricState& state) {
    switch (spec.metric_kind) {
        case MetricKind::Rmse:
            state.rmse.add(pred.data(), target.dense.data());
            break;
        case MetricKind::BceError:
            state.bce.add(pred.data(), target.dense.data());
            break;
        case MetricKind::MIoU: {
            const auto pl = predicted_labels(pred);
            const auto gl = target_labels(target);
            state.confusion.add(pl, gl);
            break;
        }
    }
}

double finish_metric(const TaskSpec& spec, const MetricState& state) {
    switch (spec.metric_kind) {
        case MetricKind::Rmse:
            return state.rmse.value();
        case MetricKind::BceError:
            return state.bce.value();
        case MetricKind::MIoU:
            return state.confusion.miou();
    }
    throw ValueError("unhandled metric kind");
}

std::vector<Sample> load_batch(const Dataset& data, const std::string& split,
                               const std::vector<int>& indices, std::size_t begin, std::size_t end) {
    std::vector<Sample> batch;
    batch.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) batch.push_back(data.by_split(split, indices[i]));
    return batch;
}

}  // namespace

std::vector<TaskEval> evaluate(MedusaModel& model, const std::vector<std::string>& tasks,
                               const Dataset& data, const std::string& split, int batch_size) {
    NoGradScope no_grad;
    const int n = data.split_size(split);
    std::vector<int> indices(n);
    std::iota(indices.begin(), indices.end(), 0);

    std::vector<MetricState> states;
    std::vector<double> loss_sums(tasks.size(), 0.0);
    for (const std::string& t : tasks) states.emplace_back(model.head(t).spec());

    for (int start = 0; start < n; start += batch_size) {
        const int end = std::min(n, start + batch_size);
        const auto batch = load_batch(data, split, indices, start, end);
        const Tensor images = stack_images(batch);
        const ScalePyramid pyr = model.extract_features(images, false);
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
            TaskHead& head = model.head(tasks[ti]);
            const TaskTarget target = make_target(head.spec(), batch);
            const TaskOutput out = head.forward(pyr, false);
            loss_sums[ti] += task_loss(head.spec(), out.prediction, target).item() * double(batch.size());
            accumulate_metric(head.spec(), out.prediction, target, states[ti]);
        }
    }

    std::vector<TaskEval> results;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        TaskEval e;
        e.spec = model.head(tasks[ti]).spec();
        e.loss = loss_sums[ti] / double(n);
        e.metric = finish_metric(e.spec, states[ti]);
        results.push_back(std::move(e));
    }
    return results;
}

TrainReport train_multitask(MedusaModel& model, const std::vector<std::string>& tasks,
                            const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (tasks.empty()) throw ValueError("train_multitask: empty task list");
    for (const std::string& t : tasks) model.head(t);  // throws on missing head

    const int steps_per_epoch = data.n_train() / config.batch_size;
    if (steps_per_epoch < 1)
        throw ValueError("train_multitask: batch size exceeds the training split");
    const long total_steps = long(config.epochs) * steps_per_epoch;

    Adam optimizer;
    {
        ModuleState bb = model.backbone_state();
        optimizer.add_group(bb.params, config.backbone_lr_scale);
        for (const auto& h : model.heads()) {
            ModuleState hs;
            h->collect(hs);
            optimizer.add_group(hs.params, 1.0);
        }
    }

    TrainReport report;
    long step = 0;
    std::vector<int> order(data.n_train());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(config.seed, 0xe70c4000ULL + std::uint64_t(epoch)));
        for (int i = int(order.size()) - 1; i > 0; --i)
            std::swap(order[std::size_t(i)], order[std::size_t(shuffle_rng.uniform_int(0, i))]);

        std::vector<double> task_loss_sums(tasks.size(), 0.0);
        for (int b = 0; b < steps_per_epoch; ++b) {
            const auto batch = load_batch(data, "train", order, std::size_t(b) * config.batch_size,
                                          std::size_t(b + 1) * config.batch_size);
            const Tensor images = stack_images(batch);

            Tape tape;
            TapeScope scope(tape);
            const ScalePyramid pyr = model.extract_features(images, true);

            Tensor total = Tensor::scalar(0.0);
            for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
                TaskHead& head = model.head(tasks[ti]);
                const TaskTarget target = make_target(head.spec(), batch);
                const TaskOutput out = head.forward(pyr, true);
                const Tensor final_loss = task_loss(head.spec(), out.prediction, target);
                task_loss_sums[ti] += final_loss.item();

                Tensor inter = Tensor::scalar(0.0);
                for (const Tensor& init : out.initial_preds)
                    inter = add(inter, task_loss(head.spec(), init, target));

                const double w = config.weight_for(head.spec().name);
                Tensor term = add(final_loss, scale(inter, config.intermediate_loss_weight));
                total = add(total, scale(term, w));
            }

            if (!std::isfinite(total.item()))
                throw DivergedError("training diverged at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(step) + ": loss = " +
                                    std::to_string(total.item()));

            backward(total);
            optimizer.step(poly_lr(step, total_steps, config.base_lr, config.poly_power));
            optimizer.zero_grad();
            ++step;
        }

        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
            ReportRow row;
            row.epoch = epoch;
            row.task = tasks[ti];
            row.split = "train";
            row.loss = task_loss_sums[ti] / double(steps_per_epoch);
            row.has_loss = true;
            report.rows.push_back(std::move(row));
        }
    }

    report.val_results = evaluate(model, tasks, data, "val", config.batch_size);
    report.test_results = evaluate(model, tasks, data, "test", config.batch_size);
    for (const std::string split : {"val", "test"}) {
        const auto& results = split == std::string("val") ? report.val_results : report.test_results;
        for (const TaskEval& e : results) {
            ReportRow row;
            row.epoch = config.epochs - 1;
            row.task = e.spec.name;
            row.split = split;
            row.loss = e.loss;
            row.metric = e.metric;
            row.has_loss = true;
            row.has_metric = true;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

void freeze_backbone(MedusaModel& model) { model.freeze_backbone_and_heads(); }

TrainReport attach_and_train_head(MedusaModel& model, const TaskSpec& new_task, HeadKind kind,
                                  bool sfa_enabled, const Dataset& data, const TrainConfig& config) {
    if (!model.backbone_frozen())
        throw StateError("attach_and_train_head requires a frozen backbone");
    if (model.has_head(new_task.name))
        throw ValueError("task " + new_task.name + " already has a head");
    model.add_head(new_task, kind, sfa_enabled);
    return train_multitask(model, {new_task.name}, data, config);
}

}  // namespace medusa

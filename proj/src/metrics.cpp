#include "medusa/metrics.hpp"

#include <cmath>

namespace medusa {

double rmse(std::span<const double> pred, std::span<const double> gt,
            std::span<const double> valid_mask) {
    if (pred.size() != gt.size() || pred.size() != valid_mask.size())
        throw ShapeError("rmse: input sizes differ");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (valid_mask[i] == 0.0) continue;
        const double d = pred[i] - gt[i];
        acc += d * d;
        ++n;
    }
    if (n == 0) throw MetricError("rmse: empty valid mask");
    return std::sqrt(acc / double(n));
}

void ConfusionAccumulator::add(std::span<const int> pred, std::span<const int> gt,
                               int ignore_index) {
    if (pred.size() != gt.size()) throw ShapeError("confusion: input sizes differ");
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int g = gt[i];
        if (g == ignore_index) continue;
        const int p = pred[i];
        if (g < 0 || g >= num_classes)
            throw LabelError("confusion: ground-truth label " + std::to_string(g) + " out of range");
        if (p < 0 || p >= num_classes)
            throw LabelError("confusion: predicted label " + std::to_string(p) + " out of range");
        if (p == g) {
            ++intersection[std::size_t(g)];
            ++union_[std::size_t(g)];
        } else {
            ++union_[std::size_t(g)];
            ++union_[std::size_t(p)];
        }
    }
}

double ConfusionAccumulator::miou() const {
    double acc = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (union_[std::size_t(c)] == 0) continue;  // absent from both maps
        acc += double(intersection[std::size_t(c)]) / double(union_[std::size_t(c)]);
        ++present;
    }
    if (present == 0) throw MetricError("miou: no class present in either map");
    return acc / double(present);
}

double miou(std::span<const int> pred_labels, std::span<const int> gt_labels,
            int num_classes, int ignore_index) {
    if (num_classes < 1) throw ValueError("miou: num_classes must be >= 1");
    ConfusionAccumulator acc(num_classes);
    acc.add(pred_labels, gt_labels, ignore_index);
    return acc.miou();
}

void RmseAccumulator::add(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size()) throw ShapeError("rmse accumulator: input sizes differ");
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        sum_sq += d * d;
    }
    count += pred.size();
}

double RmseAccumulator::value() const {
    if (count == 0) throw MetricError("rmse: no pixels accumulated");
    return std::sqrt(sum_sq / double(count));
}

double bce_error(std::span<const double> logits, std::span<const double> target) {
    BceAccumulator acc;
    acc.add(logits, target);
    return acc.value();
}

void BceAccumulator::add(std::span<const double> logits, std::span<const double> target) {
    if (logits.size() != target.size()) throw ShapeError("bce: input sizes differ");
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double x = logits[i], t = target[i];
        const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        const double sn = sp - x;  // softplus(-x)
        sum += t * sn + (1.0 - t) * sp;
    }
    count += logits.size();
}

double BceAccumulator::value() const {
    if (count == 0) throw MetricError("bce: no pixels accumulated");
    return sum / double(count);
}

MtlDelta delta_mtl(const std::vector<TaskPerformance>& multitask,
                   const std::vector<TaskPerformance>& baseline) {
    if (multitask.size() != baseline.size() || multitask.empty())
        throw ValueError("delta_mtl: task lists must be non-empty and equal length");
    MtlDelta out;
    out.per_task_relative.reserve(multitask.size());
    for (std::size_t i = 0; i < multitask.size(); ++i) {
        if (multitask[i].task.name != baseline[i].task.name)
            throw ValueError("delta_mtl: task mismatch at position " + std::to_string(i) + ": " +
                             multitask[i].task.name + " vs " + baseline[i].task.name);
        if (baseline[i].value == 0.0)
            throw MetricError("delta_mtl: baseline for " + baseline[i].task.name + " is zero");
        const double rel = (multitask[i].value - baseline[i].value) / baseline[i].value;
        out.per_task_relative.push_back(multitask[i].task.lower_is_better ? -rel : rel);
    }
    double s = 0.0;
    for (double v : out.per_task_relative) s += v;
    out.aggregate = s / double(out.per_task_relative.size());
    return out;
}

}  // namespace medusa

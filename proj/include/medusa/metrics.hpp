#pragma once

#include <span>
#include <vector>

#include "medusa/heads.hpp"

namespace medusa {

struct TaskPerformance {
    TaskSpec task;
    double value = 0.0;
};

struct MtlDelta {
    std::vector<double> per_task_relative;  // signed fractions, one per task
    double aggregate = 0.0;                 // arithmetic mean of the terms
};

// sqrt of the mean squared error over pixels where valid_mask is nonzero.
double rmse(std::span<const double> pred, std::span<const double> gt,
            std::span<const double> valid_mask);

// Per-class intersection-over-union averaged over the classes present in
// either map; classes absent from both are excluded. Pixels whose ground
// truth equals ignore_index are skipped entirely.
double miou(std::span<const int> pred_labels, std::span<const int> gt_labels,
            int num_classes, int ignore_index = -1);

// Mean unweighted binary cross-entropy of logits against {0,1} targets;
// the evaluation proxy for edge-style tasks.
double bce_error(std::span<const double> logits, std::span<const double> target);

// Mean signed relative change versus the single-task baselines, sign
// flipped for lower-is-better metrics.
MtlDelta delta_mtl(const std::vector<TaskPerformance>& multitask,
                   const std::vector<TaskPerformance>& baseline);

// Streaming helpers used by the evaluator so metrics aggregate over a whole
// split rather than per batch.
struct ConfusionAccumulator {
    int num_classes = 0;
    std::vector<std::size_t> intersection, union_;

    explicit ConfusionAccumulator(int k) : num_classes(k), intersection(k, 0), union_(k, 0) {}
    void add(std::span<const int> pred, std::span<const int> gt, int ignore_index = -1);
    double miou() const;
};

struct RmseAccumulator {
    double sum_sq = 0.0;
    std::size_t count = 0;
    void add(std::span<const double> pred, std::span<const double> gt);
    double value() const;
};

struct BceAccumulator {
    double sum = 0.0;
    std::size_t count = 0;
    void add(std::span<const double> logits, std::span<const double> target);
    double value() const;
};

}  // namespace medusa

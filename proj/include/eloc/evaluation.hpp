#pragma once

#include <array>
#include <optional>
#include <vector>

#include "eloc/loss.hpp"

namespace eloc {

struct TaskMetrics {
    double eloquent_accuracy = 0.0;  // correct among truth-eloquent nodes
    double overall_accuracy = 0.0;
    std::optional<double> auc;  // undefined when a class side is empty
    std::array<std::array<long, kNumClasses>, kNumClasses> confusion{};  // [truth][pred]
};

// AUC for detecting the eloquent class, one-vs-rest, using the aggregated
// eloquent score as the ranking statistic; tied scores are handled by the
// rank-sum (average rank) method.
std::optional<double> auc_eloquent(const Tensor& scores, const TaskLabels& truth);

TaskMetrics compute_metrics(const std::vector<int>& predicted, const Tensor& scores,
                            const TaskLabels& truth);

// Per-fold metrics for one task: equal-weight means over the fold's test
// patients that have the task.
struct FoldTaskMetrics {
    int patients = 0;
    double eloquent_accuracy = 0.0;
    double overall_accuracy = 0.0;
    std::optional<double> auc;
    int auc_defined = 0;
};

struct TaskSummary {
    bool absent = true;  // no fold had a patient with this task
    int folds = 0;
    double eloquent_accuracy = 0.0;
    double overall_accuracy = 0.0;
    std::optional<double> auc;
    int auc_folds = 0;
};

TaskSummary aggregate_cv(const std::vector<FoldTaskMetrics>& folds);

// Rank-correlation helpers (average ranks for ties).
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);
double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace eloc

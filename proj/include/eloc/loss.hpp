#pragma once

#include <array>
#include <optional>

#include "eloc/model.hpp"

namespace eloc {

// "literal" scores each true class through an independent sigmoid; the
// optional "softmax-ce" mode normalizes the three aggregated scores per node
// before the log.
enum class LossMode { literal, softmax_ce };

const char* loss_mode_name(LossMode m);
LossMode loss_mode_from_name(const std::string& name);

// Per-class penalty factors, order (eloquent, tumor, background).
struct RiskWeights {
    std::array<double, 3> language{2.25, 0.5, 0.2};
    std::array<double, 3> motor{1.5, 0.5, 0.2};

    void validate() const;
    const std::array<double, 3>& for_task(int task) const {
        return task == 0 ? language : motor;
    }
};

// One-hot ground truth for one task, class order (eloquent, tumor, background).
struct TaskLabels {
    Tensor one_hot;  // {N, 3}

    static TaskLabels from_class_ids(const std::vector<int>& ids);
    std::vector<int> class_ids() const;
    int regions() const { return one_hot.dim(0); }
    void validate() const;
};

// Ground truth per task; absent tasks contribute no loss and freeze their
// head parameters.
struct LabelTensor {
    std::array<std::optional<TaskLabels>, kNumTasks> tasks;

    bool has(int task) const { return tasks[static_cast<size_t>(task)].has_value(); }
    bool any_present() const;
};

// sum_n sum_c -delta_c * log(sigma(S_nc)) * Y_nc (literal mode), stabilized
// through the log-sigmoid identity.
Tensor task_loss(Graph& g, const Tensor& aggregated, const TaskLabels& labels,
                 const std::array<double, 3>& delta, LossMode mode);

struct TotalLoss {
    Tensor total;                                         // scalar
    std::array<std::optional<double>, kNumTasks> per_task;
    std::array<Tensor, kNumTasks> aggregated;             // {N,3} per task
};

// Sum of the present tasks' losses; absent tasks contribute exactly zero and
// receive no gradient anywhere.
TotalLoss total_loss(Graph& g, const HeadOutputs& outputs, const LabelTensor& labels,
                     const RiskWeights& weights, LossMode mode);

// The objective minimized by the trainer: as total_loss, but each task term
// is divided by its risk mass sum_n delta_{c(n)} (weighted-mean reduction,
// the convention of class-weighted cross entropy). Keeps the stated learning
// rate usable at any parcellation size and class mix.
TotalLoss training_loss(Graph& g, const HeadOutputs& outputs, const LabelTensor& labels,
                        const RiskWeights& weights, LossMode mode);

}  // namespace eloc

#include "eloc/loss.hpp"

#include <cmath>

namespace eloc {

const char* loss_mode_name(LossMode m) {
    return m == LossMode::literal ? "literal" : "softmax-ce";
}

LossMode loss_mode_from_name(const std::string& name) {
    if (name == "literal") return LossMode::literal;
    if (name == "softmax-ce") return LossMode::softmax_ce;
    throw config_error("unknown loss mode '" + name + "' (expected literal|softmax-ce)");
}

void RiskWeights::validate() const {
    for (double d : language) {
        if (!(d > 0.0)) throw config_error("language risk weights must be strictly positive");
    }
    for (double d : motor) {
        if (!(d > 0.0)) throw config_error("motor risk weights must be strictly positive");
    }
}

TaskLabels TaskLabels::from_class_ids(const std::vector<int>& ids) {
    TaskLabels labels;
    labels.one_hot = Tensor({static_cast<int>(ids.size()), kNumClasses});
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= kNumClasses) {
            throw data_error("class id " + std::to_string(ids[i]) + " out of range at node " +
                             std::to_string(i));
        }
        labels.one_hot.at(static_cast<int>(i), ids[i]) = 1.0;
    }
    return labels;
}

std::vector<int> TaskLabels::class_ids() const {
    validate();
    std::vector<int> ids(static_cast<size_t>(one_hot.rows()));
    for (int i = 0; i < one_hot.rows(); ++i) {
        for (int c = 0; c < kNumClasses; ++c) {
            if (one_hot.at(i, c) == 1.0) ids[static_cast<size_t>(i)] = c;
        }
    }
    return ids;
}

void TaskLabels::validate() const {
    if (one_hot.rank() != 2 || one_hot.cols() != kNumClasses) {
        throw data_error("labels must be {N,3} one-hot, got " + one_hot.shape_str());
    }
    for (int i = 0; i < one_hot.rows(); ++i) {
        int ones = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            const double v = one_hot.at(i, c);
            if (v == 1.0) {
                ++ones;
            } else if (v != 0.0) {
                throw data_error("label row " + std::to_string(i) + " is not one-hot");
            }
        }
        if (ones != 1) throw data_error("label row " + std::to_string(i) + " does not sum to 1");
    }
}

bool LabelTensor::any_present() const {
    for (const auto& t : tasks) {
        if (t.has_value()) return true;
    }
    return false;
}

Tensor task_loss(Graph& g, const Tensor& aggregated, const TaskLabels& labels,
                 const std::array<double, 3>& delta, LossMode mode) {
    labels.validate();
    for (double d : delta) {
        if (!(d > 0.0)) throw config_error("risk weights must be strictly positive");
    }
    if (aggregated.shape() != labels.one_hot.shape()) {
        throw dimension_error("scores " + aggregated.shape_str() + " vs labels " +
                              labels.one_hot.shape_str());
    }
    // Constant per-entry weight delta_c * Y_nc.
    Tensor weight(aggregated.shape());
    for (int i = 0; i < aggregated.rows(); ++i) {
        for (int c = 0; c < kNumClasses; ++c) {
            weight.at(i, c) = delta[static_cast<size_t>(c)] * labels.one_hot.at(i, c);
        }
    }
    Tensor log_term = mode == LossMode::literal ? g.log_sigmoid(aggregated)
                                                : g.log_softmax(aggregated, 1);
    return g.scale(g.sum(g.mul(weight, log_term)), -1.0);
}

namespace {

TotalLoss loss_impl(Graph& g, const HeadOutputs& outputs, const LabelTensor& labels,
                    const RiskWeights& weights, LossMode mode, bool normalize) {
    weights.validate();
    if (!labels.any_present()) {
        throw config_error("no supervised task present; at least one label set is required");
    }
    TotalLoss result;
    result.aggregated = aggregate_scores(g, outputs);
    Tensor total;
    for (int k = 0; k < kNumTasks; ++k) {
        if (!labels.has(k)) continue;
        const TaskLabels& y = *labels.tasks[static_cast<size_t>(k)];
        Tensor lk = task_loss(g, result.aggregated[static_cast<size_t>(k)], y,
                              weights.for_task(k), mode);
        if (normalize) {
            double mass = 0.0;
            for (int i = 0; i < y.one_hot.rows(); ++i) {
                for (int c = 0; c < kNumClasses; ++c) {
                    mass += weights.for_task(k)[static_cast<size_t>(c)] * y.one_hot.at(i, c);
                }
            }
            lk = g.scale(lk, 1.0 / mass);
        }
        result.per_task[static_cast<size_t>(k)] = lk.at(0);
        total = total.defined() ? g.add(total, lk) : lk;
    }
    result.total = total;
    return result;
}

}  // namespace

TotalLoss total_loss(Graph& g, const HeadOutputs& outputs, const LabelTensor& labels,
                     const RiskWeights& weights, LossMode mode) {
    return loss_impl(g, outputs, labels, weights, mode, false);
}

TotalLoss training_loss(Graph& g, const HeadOutputs& outputs, const LabelTensor& labels,
                        const RiskWeights& weights, LossMode mode) {
    return loss_impl(g, outputs, labels, weights, mode, true);
}

}  // namespace eloc

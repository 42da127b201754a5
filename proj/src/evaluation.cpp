#include "eloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eloc {

namespace {

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

std::optional<double> auc_eloquent(const Tensor& scores, const TaskLabels& truth) {
    truth.validate();
    const int n = truth.regions();
    if (scores.rank() != 2 || scores.rows() != n || scores.cols() != kNumClasses) {
        throw dimension_error("scores " + scores.shape_str() + " do not match labels {" +
                              std::to_string(n) + ",3}");
    }
    std::vector<double> eloquent_scores(static_cast<size_t>(n));
    long positives = 0;
    for (int i = 0; i < n; ++i) {
        eloquent_scores[static_cast<size_t>(i)] =
            scores.at(i, static_cast<int>(NodeClass::eloquent));
        if (truth.one_hot.at(i, static_cast<int>(NodeClass::eloquent)) == 1.0) ++positives;
    }
    const long negatives = n - positives;
    if (positives == 0 || negatives == 0) return std::nullopt;

    const std::vector<double> ranks = average_ranks(eloquent_scores);
    double rank_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (truth.one_hot.at(i, static_cast<int>(NodeClass::eloquent)) == 1.0) {
            rank_sum += ranks[static_cast<size_t>(i)];
        }
    }
    const double u = rank_sum - 0.5 * static_cast<double>(positives) *
                                    (static_cast<double>(positives) + 1.0);
    return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

TaskMetrics compute_metrics(const std::vector<int>& predicted, const Tensor& scores,
                            const TaskLabels& truth) {
    truth.validate();
    const int n = truth.regions();
    if (n == 0 || predicted.empty()) throw data_error("compute_metrics on empty node set");
    if (static_cast<int>(predicted.size()) != n) {
        throw dimension_error("prediction count " + std::to_string(predicted.size()) +
                              " does not match " + std::to_string(n) + " nodes");
    }

    TaskMetrics m;
    const std::vector<int> truth_ids = truth.class_ids();
    long correct = 0, eloquent_total = 0, eloquent_correct = 0;
    for (int i = 0; i < n; ++i) {
        const int t = truth_ids[static_cast<size_t>(i)];
        const int p = predicted[static_cast<size_t>(i)];
        if (p < 0 || p >= kNumClasses) {
            throw data_error("predicted class " + std::to_string(p) + " out of range");
        }
        ++m.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)];
        if (t == p) ++correct;
        if (t == static_cast<int>(NodeClass::eloquent)) {
            ++eloquent_total;
            if (p == t) ++eloquent_correct;
        }
    }
    m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    m.eloquent_accuracy = eloquent_total == 0
                              ? 0.0
                              : static_cast<double>(eloquent_correct) /
                                    static_cast<double>(eloquent_total);
    m.auc = auc_eloquent(scores, truth);
    return m;
}

TaskSummary aggregate_cv(const std::vector<FoldTaskMetrics>& folds) {
    TaskSummary s;
    double auc_sum = 0.0;
    for (const auto& f : folds) {
        if (f.patients == 0) continue;
        s.absent = false;
        ++s.folds;
        s.eloquent_accuracy += f.eloquent_accuracy;
        s.overall_accuracy += f.overall_accuracy;
        if (f.auc.has_value()) {
            ++s.auc_folds;
            auc_sum += *f.auc;
        }
    }
    if (s.folds > 0) {
        s.eloquent_accuracy /= s.folds;
        s.overall_accuracy /= s.folds;
    }
    if (s.auc_folds > 0) s.auc = auc_sum / s.auc_folds;
    return s;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw dimension_error("correlation needs two equal-length series of >= 2 points");
    }
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    return num / std::sqrt(va * vb);
}

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson_correlation(average_ranks(a), average_ranks(b));
}

}  // namespace eloc

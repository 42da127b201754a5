#include <doctest.h>

#include <cmath>

#include "eloc/gradcheck.hpp"
#include "eloc/loss.hpp"
#include "eloc/rng.hpp"

using namespace eloc;

namespace {

Tensor random_scores(Rng& rng, int n) {
    Tensor s({n, 3});
    for (long long i = 0; i < s.size(); ++i) s.at(static_cast<int>(i)) = rng.uniform(-2, 2);
    return s;
}

TaskLabels random_labels(Rng& rng, int n) {
    std::vector<int> ids(static_cast<size_t>(n));
    for (auto& id : ids) id = rng.uniform_int(0, 2);
    return TaskLabels::from_class_ids(ids);
}

HeadOutputs single_window_outputs(const std::array<Tensor, kNumTasks>& scores) {
    HeadOutputs out;
    out.window_scores.push_back(scores);
    Tensor one = Tensor::full({1}, 1.0);
    out.attention = {one, one};
    return out;
}

}  // namespace

TEST_CASE("label validation") {
    TaskLabels good = TaskLabels::from_class_ids({0, 1, 2, 2});
    good.validate();
    CHECK(good.class_ids() == std::vector<int>{0, 1, 2, 2});

    TaskLabels bad;
    bad.one_hot = Tensor::from({2, 3}, {1, 1, 0, 0, 0, 1});
    CHECK_THROWS_AS(bad.validate(), data_error);
    TaskLabels frac;
    frac.one_hot = Tensor::from({1, 3}, {0.5, 0.5, 0});
    CHECK_THROWS_AS(frac.validate(), data_error);
    CHECK_THROWS_AS(TaskLabels::from_class_ids({0, 3}), data_error);
}

TEST_CASE("task_loss closed forms") {
    // single node, true class eloquent, S=0, delta=2.25 -> 2.25*log 2
    TaskLabels y = TaskLabels::from_class_ids({0});
    Graph g;
    Tensor loss =
        task_loss(g, Tensor::zeros({1, 3}), y, {2.25, 0.5, 0.2}, LossMode::literal);
    CHECK(loss.at(0) == doctest::Approx(2.25 * std::log(2.0)).epsilon(1e-12));

    // perfect confidence drives the loss to zero
    Tensor confident = Tensor::from({1, 3}, {1e3, 0, 0});
    Graph g2;
    CHECK(task_loss(g2, confident, y, {2.25, 0.5, 0.2}, LossMode::literal).at(0) ==
          doctest::Approx(0.0).epsilon(1e-10));

    // scaling delta by k scales the loss by exactly k
    Rng rng(3);
    Tensor s = random_scores(rng, 6);
    TaskLabels labels = random_labels(rng, 6);
    Graph g3;
    const double base = task_loss(g3, s, labels, {2.25, 0.5, 0.2}, LossMode::literal).at(0);
    Graph g4;
    const double scaled =
        task_loss(g4, s, labels, {3 * 2.25, 3 * 0.5, 3 * 0.2}, LossMode::literal).at(0);
    CHECK(scaled == doctest::Approx(3.0 * base).epsilon(1e-12));

    CHECK_THROWS_AS(task_loss(g3, s, labels, {0.0, 0.5, 0.2}, LossMode::literal), config_error);
}

TEST_CASE("literal mode ignores false-class scores, softmax-ce does not") {
    Rng rng(5);
    const int n = 4;
    Tensor s = random_scores(rng, n);
    s.set_requires_grad(true);
    TaskLabels y = random_labels(rng, n);

    Graph g;
    g.backward(task_loss(g, s, y, {2.25, 0.5, 0.2}, LossMode::literal));
    const auto ids = y.class_ids();
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            if (ids[static_cast<size_t>(i)] == c) {
                CHECK(s.grad()[static_cast<size_t>(i) * 3 + c] < 0.0);  // pushes score up
            } else {
                CHECK(s.grad()[static_cast<size_t>(i) * 3 + c] == 0.0);
            }
        }
    }

    s.zero_grad();
    Graph g2;
    g2.backward(task_loss(g2, s, y, {2.25, 0.5, 0.2}, LossMode::softmax_ce));
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            if (ids[static_cast<size_t>(i)] != c) {
                CHECK(s.grad()[static_cast<size_t>(i) * 3 + c] > 0.0);  // pushes rivals down
            }
        }
    }
}

TEST_CASE("total_loss sums present tasks and freezes absent heads") {
    Rng rng(7);
    const int n = 5;
    std::array<Tensor, kNumTasks> scores;
    for (auto& s : scores) {
        s = random_scores(rng, n);
        s.set_requires_grad(true);
    }
    HeadOutputs out = single_window_outputs(scores);

    LabelTensor labels;
    labels.tasks[0] = random_labels(rng, n);  // language only
    RiskWeights risk;

    Graph g;
    TotalLoss tl = total_loss(g, out, labels, risk, LossMode::literal);
    CHECK(tl.per_task[0].has_value());
    CHECK(!tl.per_task[1].has_value());
    g.backward(tl.total);

    // language head scores received gradient; motor heads exactly zero
    bool language_nonzero = false;
    for (double v : scores[0].grad()) language_nonzero = language_nonzero || v != 0.0;
    CHECK(language_nonzero);
    for (int k = 1; k < kNumTasks; ++k) {
        for (double v : scores[static_cast<size_t>(k)].grad()) CHECK(v == 0.0);
    }

    LabelTensor none;
    Graph g2;
    CHECK_THROWS_AS(total_loss(g2, out, none, risk, LossMode::literal), config_error);
}

TEST_CASE("total_loss equals the sum of independent task losses") {
    Rng rng(11);
    const int n = 6;
    std::array<Tensor, kNumTasks> scores;
    for (auto& s : scores) s = random_scores(rng, n);
    HeadOutputs out = single_window_outputs(scores);

    LabelTensor labels;
    for (int k = 0; k < kNumTasks; ++k) labels.tasks[static_cast<size_t>(k)] = random_labels(rng, n);
    RiskWeights risk;

    Graph g;
    TotalLoss tl = total_loss(g, out, labels, risk, LossMode::literal);
    double expected = 0.0;
    for (int k = 0; k < kNumTasks; ++k) {
        Graph gk;
        expected += task_loss(gk, scores[static_cast<size_t>(k)],
                              *labels.tasks[static_cast<size_t>(k)], risk.for_task(k),
                              LossMode::literal)
                        .at(0);
    }
    CHECK(tl.total.at(0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(tl.total.at(0) >= 0.0);

    // motor symmetry: identical labels and scores across motor heads
    std::array<Tensor, kNumTasks> same = scores;
    same[2] = same[1];
    same[3] = same[1];
    HeadOutputs out2 = single_window_outputs(same);
    LabelTensor same_labels;
    same_labels.tasks[1] = random_labels(rng, n);
    same_labels.tasks[2] = same_labels.tasks[1];
    same_labels.tasks[3] = same_labels.tasks[1];
    Graph g2;
    TotalLoss tl2 = total_loss(g2, out2, same_labels, risk, LossMode::literal);
    CHECK(*tl2.per_task[1] == doctest::Approx(*tl2.per_task[2]).epsilon(1e-12));
    CHECK(*tl2.per_task[2] == doctest::Approx(*tl2.per_task[3]).epsilon(1e-12));
}

TEST_CASE("training_loss is the risk-mass-normalized total") {
    Rng rng(13);
    const int n = 8;
    std::array<Tensor, kNumTasks> scores;
    for (auto& s : scores) s = random_scores(rng, n);
    HeadOutputs out = single_window_outputs(scores);
    LabelTensor labels;
    labels.tasks[0] = random_labels(rng, n);
    labels.tasks[2] = random_labels(rng, n);
    RiskWeights risk;

    Graph g;
    TotalLoss norm = training_loss(g, out, labels, risk, LossMode::softmax_ce);
    double expected = 0.0;
    for (int k : {0, 2}) {
        Graph gk;
        const double raw = task_loss(gk, scores[static_cast<size_t>(k)],
                                     *labels.tasks[static_cast<size_t>(k)], risk.for_task(k),
                                     LossMode::softmax_ce)
                               .at(0);
        double mass = 0.0;
        for (int id : labels.tasks[static_cast<size_t>(k)]->class_ids()) {
            mass += risk.for_task(k)[static_cast<size_t>(id)];
        }
        expected += raw / mass;
    }
    CHECK(norm.total.at(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("attention receives gradient through the loss") {
    Rng rng(17);
    const int n = 4, t_count = 3;
    HeadOutputs out;
    out.window_scores.resize(t_count);
    for (int t = 0; t < t_count; ++t) {
        for (auto& s : out.window_scores[t]) s = random_scores(rng, n);
    }
    Tensor al({t_count}, true), am({t_count}, true);
    for (int t = 0; t < t_count; ++t) {
        al.at(t) = 1.0 / t_count;
        am.at(t) = 1.0 / t_count;
    }
    out.attention = {al, am};

    LabelTensor labels;
    labels.tasks[0] = random_labels(rng, n);
    Graph g;
    TotalLoss tl = total_loss(g, out, labels, RiskWeights{}, LossMode::literal);
    g.backward(tl.total);
    bool any = false;
    for (double v : al.grad()) any = any || v != 0.0;
    CHECK(any);  // language attention is trained through the loss
    for (double v : am.grad()) CHECK(v == 0.0);  // no motor task present here
}

TEST_CASE("loss gradients pass finite differences in both modes") {
    Rng rng(19);
    const int n = 5;
    Tensor s = random_scores(rng, n);
    s.set_requires_grad(true);
    TaskLabels y = random_labels(rng, n);
    for (LossMode mode : {LossMode::literal, LossMode::softmax_ce}) {
        s.zero_grad();
        auto report = check_gradients(
            [&](Graph& g) { return task_loss(g, s, y, {2.25, 0.5, 0.2}, mode); }, {{"s", s}},
            1e-6);
        INFO(loss_mode_name(mode));
        CHECK(report.max_error < 1e-7);
    }
}

#pragma once

#include <string>
#include <vector>

#include "eloc/evaluation.hpp"
#include "eloc/model.hpp"
#include "eloc/synthdata.hpp"

namespace eloc {

struct TrainConfig {
    double learning_rate = 0.002;
    double momentum = 0.9;
    double weight_decay = 5e-5;
    int epochs = 300;
    int folds = 8;
    uint64_t seed = 1;
    LossMode loss_mode = LossMode::literal;
    int batch_size = 0;  // 0 = full batch
    int threads = 0;     // 0 = hardware concurrency

    void validate() const;
};

// A patient with its connectivity already built for the target variant
// (whole-scan single window for mt-gnn-static).
struct PreparedPatient {
    std::string id;
    DynamicConnectivity connectivity;
    LabelTensor labels;
};

PreparedPatient prepare_patient(const SynthPatient& patient, const WindowConfig& window,
                                Variant variant);
std::vector<PreparedPatient> prepare_cohort(const std::vector<SynthPatient>& cohort,
                                            const WindowConfig& window, Variant variant);

// Velocity state for classical momentum, aligned with ModelState::parameters().
struct OptState {
    std::vector<std::vector<double>> velocity;

    explicit OptState(const std::vector<ModelState::ParamRef>& params);
};

// v <- momentum*v + (grad + weight_decay*param); param <- param - lr*v.
// Weight decay skips bias parameters. Gradients are zeroed after the step.
// A non-finite gradient raises a numeric error naming the parameter.
void sgd_step(std::vector<ModelState::ParamRef>& params, OptState& opt, const TrainConfig& cfg);

struct TrainResult {
    ModelState state;
    std::vector<double> epoch_mean_loss;
};

// Deterministic given cfg.seed: initialization, batching, and the gradient
// reduction order are all fixed; the per-patient losses of one batch are
// averaged. Absent tasks backpropagate nothing into their heads.
TrainResult train(const std::vector<PreparedPatient>& patients, const TrainConfig& cfg,
                  const ModelConfig& mcfg, const RiskWeights& risk = RiskWeights{});

// Seeded shuffle of ids (sorted first, so the split is a permutation-invariant
// function of the id set), then contiguous partition. Returns per-fold test
// index lists into `ids`.
std::vector<std::vector<int>> make_folds(const std::vector<std::string>& ids, int folds,
                                         uint64_t seed);

struct PatientEvaluation {
    std::string id;
    std::array<std::optional<TaskMetrics>, kNumTasks> metrics;
    std::array<std::vector<int>, kNumTasks> predicted;
    std::vector<double> attention_language;
    std::vector<double> attention_motor;
};

PatientEvaluation evaluate_patient(const ModelState& state, const PreparedPatient& patient);

struct FoldResult {
    std::vector<int> test_indices;
    std::array<FoldTaskMetrics, kNumTasks> tasks;
    std::vector<PatientEvaluation> patients;
    std::vector<double> epoch_mean_loss;
};

struct CvResult {
    std::vector<FoldResult> folds;
    std::array<TaskSummary, kNumTasks> summary;
};

CvResult cross_validate(const std::vector<PreparedPatient>& patients, const TrainConfig& cfg,
                        const ModelConfig& mcfg, const RiskWeights& risk = RiskWeights{});

}  // namespace eloc

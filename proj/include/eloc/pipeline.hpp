#pragma once

#include "eloc/io.hpp"

namespace eloc {

// Full configuration of a training-style run; serialized into manifests.
struct RunOptions {
    WindowConfig window;
    ModelConfig model;
    TrainConfig train;
    RiskWeights risk;
};

json to_json(const RunOptions& opts);
RunOptions run_options_from_json(const json& j);

// simulate: one file per patient plus cohort index and manifest.
void run_simulate(const SynthConfig& cfg, const fs::path& out_dir);

// train on the whole cohort; writes checkpoint.bin, loss_history.tsv, manifest.
TrainResult run_train(const fs::path& cohort_dir, const RunOptions& opts,
                      const fs::path& out_dir);

// k-fold cross-validation; writes metrics.jsonl, per-patient attention TSVs,
// and the manifest.
CvResult run_crossval(const fs::path& cohort_dir, const RunOptions& opts,
                      const fs::path& out_dir);

struct BilateralReport {
    std::vector<std::string> test_ids;
    std::vector<double> language_accuracy;       // per test patient
    std::vector<bool> right_hemisphere_detected;  // >=1 right-half region predicted eloquent
    double mean_language_accuracy = 0.0;
    int detected_count = 0;
};

// Trains on unilateral patients only and tests on the bilateral ones.
BilateralReport run_bilateral(const fs::path& cohort_dir, const RunOptions& opts,
                              const fs::path& out_dir);

struct PredictResult {
    std::array<std::vector<int>, kNumTasks> labels;
    std::array<Tensor, kNumTasks> scores;  // {N,3} aggregated per task
    std::vector<double> attention_language;
    std::vector<double> attention_motor;
};

PredictResult run_predict(const fs::path& checkpoint_path, const fs::path& patient_path,
                          const fs::path& out_dir);

}  // namespace eloc

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "eloc/connectivity.hpp"
#include "eloc/layers.hpp"

namespace eloc {

enum class Variant { proposed, mt_ann, mt_gnn_static };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

inline constexpr int kNumTasks = 4;
inline constexpr int kNumClasses = 3;
// Task order is fixed: language uses the language attention vector and risk
// weights; the three motor tasks share the motor attention vector.
inline constexpr std::array<const char*, kNumTasks> kTaskNames{"language", "finger", "foot",
                                                               "tongue"};
// Class channel order: eloquent, tumor, background.
enum class NodeClass : int { eloquent = 0, tumor = 1, background = 2 };

struct ModelConfig {
    int regions = 90;   // N
    int filters = 25;   // F
    std::array<int, 2> fc_dims{64, 32};
    int lstm_hidden = 16;
    double leaky_slope = -0.1;
    Variant variant = Variant::proposed;
    bool e2n_channel_mix = false;
    // mt-ann trunk widths; 0 means solve at build time so the total count
    // lands within 5% of the proposed variant's.
    int ann_hidden1 = 0;
    int ann_hidden2 = 0;

    void validate() const;
};

struct HeadParams {
    Tensor weights;
    Tensor bias;
};

// All learnable parameters of one model instance. Which fields are populated
// depends on the variant; parameters() enumerates the populated ones in a
// fixed order.
struct ModelState {
    ModelConfig config;

    E2EParams e2e;
    E2NParams e2n;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;
    N2GParams n2g;
    LstmParams lstm;

    // mt-ann trunk on the flattened connectivity matrix.
    Tensor ann_w1, ann_b1, ann_w2, ann_b2, ann_q_w, ann_q_b;

    std::array<HeadParams, kNumTasks> heads;

    struct ParamRef {
        std::string name;
        Tensor tensor;
        bool decay;  // weight decay applies (weights yes, biases no)
    };

    std::vector<ParamRef> parameters() const;
    std::vector<ParamRef> head_parameters(int task) const;
    long long parameter_count() const;

    // Deep copy; gradients start zeroed.
    ModelState clone(bool requires_grad) const;
};

// Parameter counts from shapes alone (no allocation).
long long proposed_parameter_count(const ModelConfig& cfg);
long long ann_parameter_count(const ModelConfig& cfg, int hidden1, int hidden2);

// Initializes a model for the configured variant. Weights are uniform in
// +-1/sqrt(fan_in); biases are zero except the LSTM forget gates (1.0).
// For mt-ann, unsolved trunk widths are chosen to match the proposed
// variant's parameter count within 5% (config error when impossible).
ModelState build_variant(const ModelConfig& cfg, uint64_t seed);

struct HeadOutputs {
    // window_scores[t][task] has shape {N, 3}.
    std::vector<std::array<Tensor, kNumTasks>> window_scores;
    AttentionPair attention;  // each {T}; constant [1.0] for the static variant
};

// Full forward pass over the masked connectivity sequence. Parameters are
// shared across windows; the static variant requires a single whole-scan
// window.
HeadOutputs forward(Graph& g, const DynamicConnectivity& dc, const ModelState& state);

// Attention-weighted sum over windows; language head weighted by the
// language attention, motor heads by the motor attention. Each entry {N, 3}.
std::array<Tensor, kNumTasks> aggregate_scores(Graph& g, const HeadOutputs& outputs);

// Per-node argmax over the three classes, ties broken toward the lowest
// class index (eloquent < tumor < background).
std::vector<int> predict_labels(const Tensor& aggregated);

}  // namespace eloc

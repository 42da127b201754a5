#include <doctest.h>

#include <cmath>

#include "eloc/gradcheck.hpp"
#include "eloc/loss.hpp"
#include "eloc/rng.hpp"
#include "eloc/synthdata.hpp"
#include "eloc/training.hpp"

using namespace eloc;

namespace {

SynthConfig tiny_synth() {
    SynthConfig cfg;
    cfg.regions = 16;
    cfg.frames = 55;  // T=3 at D=45, stride 5
    cfg.patients = 1;
    cfg.language_size = 3;
    cfg.distractor_size = 2;
    cfg.motor_sizes = {2, 2, 2};
    cfg.tumor_size = {1, 2};
    cfg.interval_length = {20, 30};
    cfg.seed = 5;
    return cfg;
}

ModelConfig tiny_model(Variant variant) {
    ModelConfig cfg;
    cfg.regions = 16;
    cfg.filters = 2;
    cfg.fc_dims = {6, 4};
    cfg.lstm_hidden = 3;
    cfg.variant = variant;
    // desk-scale models cannot match the proposed parameter count; pin the
    // trunk widths instead of solving for them
    cfg.ann_hidden1 = 2;
    cfg.ann_hidden2 = 3;
    return cfg;
}

// Nudges every parameter away from structural kink points (zero-initialized
// biases meet masked-zero connectivity entries exactly at the LeakyReLU
// corner, where finite differences straddle both slopes).
void nudge_params(ModelState& state, uint64_t seed) {
    Rng rng(seed);
    for (auto& p : state.parameters()) {
        for (long long i = 0; i < p.tensor.size(); ++i) {
            p.tensor.at(static_cast<int>(i)) += rng.uniform(0.01, 0.06);
        }
    }
}

DynamicConnectivity tiny_connectivity(const SynthPatient& patient, Variant variant) {
    WindowConfig wc;
    if (variant == Variant::mt_gnn_static) {
        wc.window_length = patient.time_series.frames();
        wc.stride = wc.window_length;
    }
    return build_dynamic_connectivity(patient.time_series, wc, patient.tumor_mask);
}

}  // namespace

TEST_CASE("variant parameter counts") {
    // E2E at N=384, F=25 holds 2*F*N + F weights.
    ModelConfig big;
    big.regions = 384;
    big.filters = 25;
    ModelState state = build_variant(big, 1);
    CHECK(state.e2e.row_filters.size() + state.e2e.col_filters.size() + state.e2e.bias.size() ==
          19225);
    CHECK(state.parameter_count() == proposed_parameter_count(big));

    // mt-ann matches the proposed count within 5% at the default scale.
    ModelConfig ann;
    ann.variant = Variant::mt_ann;
    ModelState ann_state = build_variant(ann, 1);
    const double target = static_cast<double>(proposed_parameter_count(ModelConfig{}));
    const double count = static_cast<double>(ann_state.parameter_count());
    CHECK(std::abs(count - target) / target < 0.05);

    // static variant drops the attention branch
    ModelConfig st;
    st.variant = Variant::mt_gnn_static;
    ModelState st_state = build_variant(st, 1);
    CHECK(!st_state.n2g.filters.defined());
    CHECK(st_state.lstm.layers.empty());
    CHECK(st_state.parameter_count() < build_variant(ModelConfig{}, 1).parameter_count());

    CHECK_THROWS_AS(variant_from_name("bogus"), config_error);
}

TEST_CASE("forward shapes and static attention") {
    const SynthConfig sc = tiny_synth();
    const SynthPatient patient = generate_patient(sc, 3, PatientPlan{}, "p0");

    for (Variant variant : {Variant::proposed, Variant::mt_ann, Variant::mt_gnn_static}) {
        ModelState state = build_variant(tiny_model(variant), 7);
        const DynamicConnectivity dc = tiny_connectivity(patient, variant);
        Graph g;
        HeadOutputs out = forward(g, dc, state);
        const int t_count = variant == Variant::mt_gnn_static ? 1 : 3;
        CHECK(static_cast<int>(out.window_scores.size()) == t_count);
        for (const auto& per_task : out.window_scores) {
            for (const Tensor& scores : per_task) {
                CHECK(scores.shape() == std::vector<int>{16, 3});
                CHECK(scores.all_finite());
            }
        }
        CHECK(out.attention.language.dim(0) == t_count);
        if (variant == Variant::mt_gnn_static) {
            CHECK(out.attention.language.at(0) == 1.0);
            CHECK(out.attention.motor.at(0) == 1.0);
        }
    }
}

TEST_CASE("time-constant input gives identical per-window scores") {
    ModelState state = build_variant(tiny_model(Variant::proposed), 11);
    DynamicConnectivity dc;
    Tensor w = Tensor::zeros({16, 16});
    for (int t = 0; t < 3; ++t) dc.matrices.push_back(w);
    Graph g;
    HeadOutputs out = forward(g, dc, state);
    for (int k = 0; k < kNumTasks; ++k) {
        for (int t = 1; t < 3; ++t) {
            for (long long i = 0; i < out.window_scores[0][k].size(); ++i) {
                CHECK(out.window_scores[t][k].at(static_cast<int>(i)) ==
                      out.window_scores[0][k].at(static_cast<int>(i)));
            }
        }
    }
}

TEST_CASE("aggregation is an attention-weighted sum") {
    Rng rng(13);
    const int n = 5, t_count = 4;
    HeadOutputs out;
    out.window_scores.resize(t_count);
    for (int t = 0; t < t_count; ++t) {
        for (int k = 0; k < kNumTasks; ++k) {
            Tensor s({n, 3});
            for (long long i = 0; i < s.size(); ++i) {
                s.at(static_cast<int>(i)) = rng.uniform(-1, 1);
            }
            out.window_scores[t][k] = s;
        }
    }
    Tensor al({t_count}), am({t_count});
    double suml = 0.0, summ = 0.0;
    for (int t = 0; t < t_count; ++t) {
        al.at(t) = rng.uniform(0.01, 1.0);
        am.at(t) = rng.uniform(0.01, 1.0);
        suml += al.at(t);
        summ += am.at(t);
    }
    for (int t = 0; t < t_count; ++t) {
        al.at(t) /= suml;
        am.at(t) /= summ;
    }
    out.attention = {al, am};

    Graph g;
    const auto agg = aggregate_scores(g, out);
    for (int k = 0; k < kNumTasks; ++k) {
        const Tensor& attn = k == 0 ? al : am;
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 3; ++c) {
                double expected = 0.0;
                double lo = 1e300, hi = -1e300;
                for (int t = 0; t < t_count; ++t) {
                    expected += attn.at(t) * out.window_scores[t][k].at(i, c);
                    lo = std::min(lo, out.window_scores[t][k].at(i, c));
                    hi = std::max(hi, out.window_scores[t][k].at(i, c));
                }
                CHECK(agg[k].at(i, c) == doctest::Approx(expected).epsilon(1e-12));
                // convex combination
                CHECK(agg[k].at(i, c) >= lo - 1e-12);
                CHECK(agg[k].at(i, c) <= hi + 1e-12);
            }
        }
    }

    // one-hot attention selects a single window
    Tensor onehot({t_count});
    onehot.at(2) = 1.0;
    out.attention = {onehot, onehot};
    Graph g2;
    const auto picked = aggregate_scores(g2, out);
    for (long long i = 0; i < picked[1].size(); ++i) {
        CHECK(picked[1].at(static_cast<int>(i)) ==
              doctest::Approx(out.window_scores[2][1].at(static_cast<int>(i))));
    }
}

TEST_CASE("predict_labels argmax with documented tie-break") {
    Tensor s = Tensor::from({3, 3},
                            {2, 1, 0,    // eloquent wins
                             1, 1, 0,    // tie -> lowest index (eloquent)
                             0, 1, 1});  // tie -> tumor before background
    const auto labels = predict_labels(s);
    CHECK(labels == std::vector<int>{0, 0, 1});

    // invariant under strictly increasing monotone transforms
    Rng rng(17);
    Tensor r({6, 3});
    for (long long i = 0; i < r.size(); ++i) r.at(static_cast<int>(i)) = rng.uniform(-2, 2);
    const auto base = predict_labels(r);
    Tensor mapped({6, 3});
    for (long long i = 0; i < r.size(); ++i) {
        mapped.at(static_cast<int>(i)) = std::tanh(r.at(static_cast<int>(i))) * 3.0 + 1.0;
    }
    CHECK(predict_labels(mapped) == base);

    Tensor bad = Tensor::from({1, 3}, {0.0, std::nan(""), 1.0});
    CHECK_THROWS_AS(predict_labels(bad), numeric_error);
}

TEST_CASE("tumor invariance end to end") {
    SynthConfig sc = tiny_synth();
    const SynthPatient patient = generate_patient(sc, 3, PatientPlan{}, "p0");
    ModelState state = build_variant(tiny_model(Variant::proposed), 19);

    WindowConfig wc;
    const DynamicConnectivity base =
        build_dynamic_connectivity(patient.time_series, wc, patient.tumor_mask);

    // Change the time series only at masked regions.
    Rng rng(23);
    Tensor perturbed = patient.time_series.data.clone();
    for (int idx : patient.tumor_mask.region_indices) {
        for (int t = 0; t < sc.frames; ++t) perturbed.at(t, idx) = rng.normal() * 10.0;
    }
    const DynamicConnectivity other =
        build_dynamic_connectivity(TimeSeries(perturbed), wc, patient.tumor_mask);

    Graph g1, g2;
    HeadOutputs out1 = forward(g1, base, state);
    HeadOutputs out2 = forward(g2, other, state);
    for (size_t t = 0; t < out1.window_scores.size(); ++t) {
        for (int k = 0; k < kNumTasks; ++k) {
            for (long long i = 0; i < out1.window_scores[t][k].size(); ++i) {
                CHECK(out1.window_scores[t][k].at(static_cast<int>(i)) ==
                      out2.window_scores[t][k].at(static_cast<int>(i)));
            }
        }
    }
    for (int t = 0; t < out1.attention.language.dim(0); ++t) {
        CHECK(out1.attention.language.at(t) == out2.attention.language.at(t));
        CHECK(out1.attention.motor.at(t) == out2.attention.motor.at(t));
    }
}

TEST_CASE("full-model gradients pass finite differences for all variants") {
    const SynthConfig sc = tiny_synth();
    const SynthPatient patient = generate_patient(sc, 3, PatientPlan{}, "p0");
    RiskWeights risk;

    for (Variant variant : {Variant::proposed, Variant::mt_ann, Variant::mt_gnn_static}) {
        ModelState state = build_variant(tiny_model(variant), 29);
        nudge_params(state, 57);
        const DynamicConnectivity dc = tiny_connectivity(patient, variant);
        std::vector<NamedParam> params;
        for (const auto& p : state.parameters()) params.push_back({p.name, p.tensor});
        auto f = [&](Graph& g) {
            HeadOutputs out = forward(g, dc, state);
            return total_loss(g, out, patient.labels, risk, LossMode::literal).total;
        };
        auto report = check_gradients(f, params, 1e-5);
        INFO(variant_name(variant) << " worst " << report.worst.param << "["
                                   << report.worst.index << "]");
        // Entries a central difference can resolve must agree relatively;
        // everything else agrees absolutely at the noise floor.
        CHECK(report.max_error_significant < 1e-5);
        CHECK(report.max_abs_diff < 1e-9);
    }
}

TEST_CASE("model forward composes the individually tested layers") {
    const SynthConfig sc = tiny_synth();
    const SynthPatient patient = generate_patient(sc, 3, PatientPlan{}, "p0");
    ModelConfig mc = tiny_model(Variant::proposed);
    ModelState state = build_variant(mc, 31);
    const DynamicConnectivity dc = tiny_connectivity(patient, Variant::proposed);

    Graph g;
    HeadOutputs out = forward(g, dc, state);

    // Reference composition from the public layer ops.
    Graph r;
    std::vector<Tensor> qs;
    for (int t = 0; t < dc.window_count(); ++t) {
        Tensor maps = e2e_forward(r, dc.matrices[t], state.e2e, mc.leaky_slope);
        Tensor nodes = e2n_forward(r, maps, state.e2n, mc.leaky_slope);
        Tensor x = nodewise_fc(r, r.transpose(nodes), state.fc1_w, state.fc1_b, mc.leaky_slope);
        x = nodewise_fc(r, x, state.fc2_w, state.fc2_b, mc.leaky_slope);
        for (int k = 0; k < kNumTasks; ++k) {
            Tensor scores = nodewise_affine(r, x, state.heads[k].weights, state.heads[k].bias);
            for (long long i = 0; i < scores.size(); ++i) {
                CHECK(out.window_scores[t][k].at(static_cast<int>(i)) ==
                      doctest::Approx(scores.at(static_cast<int>(i))).epsilon(1e-12));
            }
        }
        qs.push_back(r.reshape(n2g_forward(r, nodes, state.n2g, mc.leaky_slope), {1, mc.filters}));
    }
    AttentionPair attn = lstm_attention(r, r.concat_rows(qs), state.lstm);
    for (int t = 0; t < dc.window_count(); ++t) {
        CHECK(out.attention.language.at(t) == doctest::Approx(attn.language.at(t)).epsilon(1e-12));
        CHECK(out.attention.motor.at(t) == doctest::Approx(attn.motor.at(t)).epsilon(1e-12));
    }
}

TEST_CASE("dimension mismatches are rejected") {
    ModelState state = build_variant(tiny_model(Variant::proposed), 3);
    DynamicConnectivity dc;
    dc.matrices.push_back(Tensor::zeros({8, 8}));  // model expects 16
    Graph g;
    CHECK_THROWS_AS(forward(g, dc, state), dimension_error);

    ModelState st = build_variant(tiny_model(Variant::mt_gnn_static), 3);
    DynamicConnectivity two;
    two.matrices.push_back(Tensor::zeros({16, 16}));
    two.matrices.push_back(Tensor::zeros({16, 16}));
    Graph g2;
    CHECK_THROWS_AS(forward(g2, two, st), dimension_error);
}

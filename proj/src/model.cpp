#include "eloc/model.hpp"

#include <cmath>
#include <limits>

#include "eloc/rng.hpp"

namespace eloc {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::proposed: return "proposed";
        case Variant::mt_ann: return "mt-ann";
        case Variant::mt_gnn_static: return "mt-gnn-static";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "proposed") return Variant::proposed;
    if (name == "mt-ann") return Variant::mt_ann;
    if (name == "mt-gnn-static") return Variant::mt_gnn_static;
    throw config_error("unknown variant '" + name +
                       "' (expected proposed|mt-ann|mt-gnn-static)");
}

void ModelConfig::validate() const {
    if (regions < 2) throw config_error("model needs at least 2 regions");
    if (filters < 1) throw config_error("filter count must be >= 1");
    if (fc_dims[0] < 1 || fc_dims[1] < 1) throw config_error("fc dims must be >= 1");
    if (lstm_hidden < 1) throw config_error("lstm hidden size must be >= 1");
    if (!std::isfinite(leaky_slope)) throw config_error("leaky slope must be finite");
    if (ann_hidden1 < 0 || ann_hidden2 < 0) throw config_error("ann hidden sizes must be >= 0");
}

namespace {

long long lstm_parameter_count(int input, int hidden1) {
    // Layer 1: input -> hidden1, layer 2: hidden1 -> 2.
    return 4LL * hidden1 * (input + hidden1 + 1) + 8LL * (hidden1 + 3);
}

}  // namespace

long long proposed_parameter_count(const ModelConfig& cfg) {
    const long long n = cfg.regions, f = cfg.filters;
    const long long d1 = cfg.fc_dims[0], d2 = cfg.fc_dims[1];
    long long count = 2 * f * n + f;                                // e2e
    count += cfg.e2n_channel_mix ? f * f * n + f : f * n + f;       // e2n
    count += f * d1 + d1 + d1 * d2 + d2;                            // fc stack
    count += kNumTasks * (d2 * kNumClasses + kNumClasses);          // heads
    count += f * n + f;                                             // n2g
    count += lstm_parameter_count(static_cast<int>(f), cfg.lstm_hidden);
    return count;
}

long long ann_parameter_count(const ModelConfig& cfg, int hidden1, int hidden2) {
    const long long n = cfg.regions, f = cfg.filters;
    const long long h1 = hidden1, h2 = hidden2;
    long long count = n * n * h1 + h1;                              // flattened input layer
    count += h1 * h2 + h2;                                          // trunk layer 2
    count += h2 * f + f;                                            // q projection
    count += kNumTasks * (h2 * kNumClasses * n + kNumClasses * n);  // heads
    count += lstm_parameter_count(static_cast<int>(f), cfg.lstm_hidden);
    return count;
}

namespace {

std::pair<int, int> solve_ann_dims(const ModelConfig& cfg) {
    if (cfg.ann_hidden1 > 0 && cfg.ann_hidden2 > 0) {
        return {cfg.ann_hidden1, cfg.ann_hidden2};
    }
    const long long target = proposed_parameter_count(cfg);
    long long best_diff = std::numeric_limits<long long>::max();
    std::pair<int, int> best{0, 0};
    for (int h1 = 1; h1 <= 1024; ++h1) {
        if (ann_parameter_count(cfg, h1, 1) > target + target / 2 && h1 > 1) break;
        for (int h2 = 1; h2 <= 1024; ++h2) {
            const long long count = ann_parameter_count(cfg, h1, h2);
            const long long diff = std::llabs(count - target);
            if (diff < best_diff) {
                best_diff = diff;
                best = {h1, h2};
            }
            if (count > target) break;
        }
    }
    if (best.first == 0 ||
        static_cast<double>(best_diff) > 0.05 * static_cast<double>(target)) {
        throw config_error("mt-ann cannot match the proposed parameter count (" +
                           std::to_string(target) + ") within 5% at N=" +
                           std::to_string(cfg.regions));
    }
    return best;
}

Tensor init_uniform(Rng& rng, std::vector<int> shape, int fan_in) {
    Tensor t(std::move(shape), true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (long long i = 0; i < t.size(); ++i) {
        t.at(static_cast<int>(i)) = rng.uniform(-bound, bound);
    }
    return t;
}

Tensor init_zeros(std::vector<int> shape) { return Tensor(std::move(shape), true); }

LstmParams init_lstm(Rng& rng, int input, int hidden1) {
    LstmParams lstm;
    const auto make_layer = [&rng](int in, int hidden) {
        LstmLayerParams layer;
        layer.w_input = init_uniform(rng, {in, 4 * hidden}, in);
        layer.w_hidden = init_uniform(rng, {hidden, 4 * hidden}, hidden);
        layer.bias = init_zeros({4 * hidden});
        // Forget-gate bias starts at 1.
        for (int i = hidden; i < 2 * hidden; ++i) layer.bias.at(i) = 1.0;
        return layer;
    };
    lstm.layers.push_back(make_layer(input, hidden1));
    lstm.layers.push_back(make_layer(hidden1, 2));
    return lstm;
}

}  // namespace

ModelState build_variant(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelState state;
    state.config = cfg;
    Rng rng(seed);
    const int n = cfg.regions, f = cfg.filters;
    const int d1 = cfg.fc_dims[0], d2 = cfg.fc_dims[1];

    switch (cfg.variant) {
        case Variant::proposed:
        case Variant::mt_gnn_static: {
            state.e2e.row_filters = init_uniform(rng, {f, n}, n);
            state.e2e.col_filters = init_uniform(rng, {f, n}, n);
            state.e2e.bias = init_zeros({f});
            if (cfg.e2n_channel_mix) {
                state.e2n.filters = init_uniform(rng, {f, f, n}, f * n);
            } else {
                state.e2n.filters = init_uniform(rng, {f, n}, n);
            }
            state.e2n.bias = init_zeros({f});
            state.fc1_w = init_uniform(rng, {f, d1}, f);
            state.fc1_b = init_zeros({d1});
            state.fc2_w = init_uniform(rng, {d1, d2}, d1);
            state.fc2_b = init_zeros({d2});
            for (int k = 0; k < kNumTasks; ++k) {
                state.heads[k].weights = init_uniform(rng, {d2, kNumClasses}, d2);
                state.heads[k].bias = init_zeros({kNumClasses});
            }
            if (cfg.variant == Variant::proposed) {
                state.n2g.filters = init_uniform(rng, {f, n}, n);
                state.n2g.bias = init_zeros({f});
                state.lstm = init_lstm(rng, f, cfg.lstm_hidden);
            }
            break;
        }
        case Variant::mt_ann: {
            const auto [h1, h2] = solve_ann_dims(cfg);
            state.config.ann_hidden1 = h1;
            state.config.ann_hidden2 = h2;
            state.ann_w1 = init_uniform(rng, {n * n, h1}, n * n);
            state.ann_b1 = init_zeros({h1});
            state.ann_w2 = init_uniform(rng, {h1, h2}, h1);
            state.ann_b2 = init_zeros({h2});
            state.ann_q_w = init_uniform(rng, {h2, f}, h2);
            state.ann_q_b = init_zeros({f});
            for (int k = 0; k < kNumTasks; ++k) {
                state.heads[k].weights = init_uniform(rng, {h2, kNumClasses * n}, h2);
                state.heads[k].bias = init_zeros({kNumClasses * n});
            }
            state.lstm = init_lstm(rng, f, cfg.lstm_hidden);
            break;
        }
    }
    return state;
}

std::vector<ModelState::ParamRef> ModelState::parameters() const {
    std::vector<ParamRef> out;
    const auto push = [&out](const std::string& name, const Tensor& t, bool decay) {
        if (t.defined()) out.push_back(ParamRef{name, t, decay});
    };
    push("e2e.row_filters", e2e.row_filters, true);
    push("e2e.col_filters", e2e.col_filters, true);
    push("e2e.bias", e2e.bias, false);
    push("e2n.filters", e2n.filters, true);
    push("e2n.bias", e2n.bias, false);
    push("fc1.weights", fc1_w, true);
    push("fc1.bias", fc1_b, false);
    push("fc2.weights", fc2_w, true);
    push("fc2.bias", fc2_b, false);
    push("ann.w1", ann_w1, true);
    push("ann.b1", ann_b1, false);
    push("ann.w2", ann_w2, true);
    push("ann.b2", ann_b2, false);
    push("ann.q_weights", ann_q_w, true);
    push("ann.q_bias", ann_q_b, false);
    for (int k = 0; k < kNumTasks; ++k) {
        push(std::string("head.") + kTaskNames[k] + ".weights", heads[k].weights, true);
        push(std::string("head.") + kTaskNames[k] + ".bias", heads[k].bias, false);
    }
    push("n2g.filters", n2g.filters, true);
    push("n2g.bias", n2g.bias, false);
    for (size_t l = 0; l < lstm.layers.size(); ++l) {
        const std::string prefix = "lstm." + std::to_string(l);
        push(prefix + ".w_input", lstm.layers[l].w_input, true);
        push(prefix + ".w_hidden", lstm.layers[l].w_hidden, true);
        push(prefix + ".bias", lstm.layers[l].bias, false);
    }
    return out;
}

std::vector<ModelState::ParamRef> ModelState::head_parameters(int task) const {
    std::vector<ParamRef> out;
    out.push_back(ParamRef{std::string("head.") + kTaskNames[task] + ".weights",
                           heads[task].weights, true});
    out.push_back(
        ParamRef{std::string("head.") + kTaskNames[task] + ".bias", heads[task].bias, false});
    return out;
}

long long ModelState::parameter_count() const {
    long long count = 0;
    for (const auto& p : parameters()) count += p.tensor.size();
    return count;
}

ModelState ModelState::clone(bool requires_grad) const {
    ModelState out;
    out.config = config;
    const auto copy = [requires_grad](const Tensor& t) {
        if (!t.defined()) return Tensor();
        Tensor c = t.clone();
        c.set_requires_grad(requires_grad);
        return c;
    };
    out.e2e = {copy(e2e.row_filters), copy(e2e.col_filters), copy(e2e.bias)};
    out.e2n = {copy(e2n.filters), copy(e2n.bias)};
    out.fc1_w = copy(fc1_w);
    out.fc1_b = copy(fc1_b);
    out.fc2_w = copy(fc2_w);
    out.fc2_b = copy(fc2_b);
    out.n2g = {copy(n2g.filters), copy(n2g.bias)};
    for (const auto& layer : lstm.layers) {
        out.lstm.layers.push_back(
            LstmLayerParams{copy(layer.w_input), copy(layer.w_hidden), copy(layer.bias)});
    }
    out.ann_w1 = copy(ann_w1);
    out.ann_b1 = copy(ann_b1);
    out.ann_w2 = copy(ann_w2);
    out.ann_b2 = copy(ann_b2);
    out.ann_q_w = copy(ann_q_w);
    out.ann_q_b = copy(ann_q_b);
    for (int k = 0; k < kNumTasks; ++k) {
        out.heads[k] = {copy(heads[k].weights), copy(heads[k].bias)};
    }
    return out;
}

HeadOutputs forward(Graph& g, const DynamicConnectivity& dc, const ModelState& state) {
    const ModelConfig& cfg = state.config;
    if (dc.window_count() == 0) throw data_error("empty connectivity sequence");
    if (dc.regions() != cfg.regions) {
        throw dimension_error("connectivity has " + std::to_string(dc.regions()) +
                              " regions, model expects " + std::to_string(cfg.regions));
    }
    const int t_count = dc.window_count();
    if (cfg.variant == Variant::mt_gnn_static && t_count != 1) {
        throw dimension_error("static variant expects a single whole-scan window, got T=" +
                              std::to_string(t_count));
    }

    HeadOutputs out;
    out.window_scores.resize(static_cast<size_t>(t_count));
    std::vector<Tensor> q_rows;
    if (cfg.variant == Variant::proposed) q_rows.reserve(static_cast<size_t>(t_count));

    for (int t = 0; t < t_count; ++t) {
        const Tensor& w = dc.matrices[static_cast<size_t>(t)];
        if (cfg.variant == Variant::mt_ann) {
            Tensor flat = g.reshape(w, {1, cfg.regions * cfg.regions});
            Tensor z1 = nodewise_fc(g, flat, state.ann_w1, state.ann_b1, cfg.leaky_slope);
            Tensor z2 = nodewise_fc(g, z1, state.ann_w2, state.ann_b2, cfg.leaky_slope);
            for (int k = 0; k < kNumTasks; ++k) {
                Tensor scores =
                    nodewise_affine(g, z2, state.heads[k].weights, state.heads[k].bias);
                out.window_scores[static_cast<size_t>(t)][static_cast<size_t>(k)] =
                    g.reshape(scores, {cfg.regions, kNumClasses});
            }
            q_rows.push_back(nodewise_affine(g, z2, state.ann_q_w, state.ann_q_b));
        } else {
            Tensor filter_feats;  // {F, N}
            if (cfg.e2n_channel_mix) {
                Tensor maps = e2e_forward(g, w, state.e2e, cfg.leaky_slope);
                filter_feats = e2n_forward(g, maps, state.e2n, cfg.leaky_slope);
            } else {
                filter_feats = e2e_e2n_fused(g, w, state.e2e, state.e2n, cfg.leaky_slope);
            }
            Tensor node_feats = g.transpose(filter_feats);  // {N, F}
            Tensor x1 = nodewise_fc(g, node_feats, state.fc1_w, state.fc1_b, cfg.leaky_slope);
            Tensor x2 = nodewise_fc(g, x1, state.fc2_w, state.fc2_b, cfg.leaky_slope);
            for (int k = 0; k < kNumTasks; ++k) {
                out.window_scores[static_cast<size_t>(t)][static_cast<size_t>(k)] =
                    nodewise_affine(g, x2, state.heads[k].weights, state.heads[k].bias);
            }
            if (cfg.variant == Variant::proposed) {
                Tensor q = n2g_forward(g, filter_feats, state.n2g, cfg.leaky_slope);
                q_rows.push_back(g.reshape(q, {1, cfg.filters}));
            }
        }
    }

    if (cfg.variant == Variant::mt_gnn_static) {
        Tensor ones = Tensor::full({1}, 1.0);
        out.attention = AttentionPair{ones, ones};
    } else {
        Tensor q_seq = g.concat_rows(q_rows);
        out.attention = lstm_attention(g, q_seq, state.lstm);
    }
    return out;
}

std::array<Tensor, kNumTasks> aggregate_scores(Graph& g, const HeadOutputs& outputs) {
    const int t_count = static_cast<int>(outputs.window_scores.size());
    if (t_count == 0) throw data_error("no window scores to aggregate");
    const int n = outputs.window_scores[0][0].dim(0);

    std::array<Tensor, kNumTasks> aggregated;
    for (int k = 0; k < kNumTasks; ++k) {
        std::vector<Tensor> rows;
        rows.reserve(static_cast<size_t>(t_count));
        for (int t = 0; t < t_count; ++t) {
            rows.push_back(g.reshape(
                outputs.window_scores[static_cast<size_t>(t)][static_cast<size_t>(k)],
                {1, n * kNumClasses}));
        }
        Tensor stacked = g.concat_rows(rows);  // {T, 3N}
        const Tensor& attn = k == 0 ? outputs.attention.language : outputs.attention.motor;
        Tensor a_row = g.reshape(attn, {1, t_count});
        aggregated[static_cast<size_t>(k)] =
            g.reshape(g.matmul(a_row, stacked), {n, kNumClasses});
    }
    return aggregated;
}

std::vector<int> predict_labels(const Tensor& aggregated) {
    if (aggregated.rank() != 2 || aggregated.cols() != kNumClasses) {
        throw dimension_error("predict_labels expects {N,3} scores, got " + aggregated.shape_str());
    }
    if (!aggregated.all_finite()) throw numeric_error("scores contain non-finite values");
    std::vector<int> labels(static_cast<size_t>(aggregated.rows()));
    for (int i = 0; i < aggregated.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < kNumClasses; ++c) {
            if (aggregated.at(i, c) > aggregated.at(i, best)) best = c;
        }
        labels[static_cast<size_t>(i)] = best;
    }
    return labels;
}

}  // namespace eloc

#include "eloc/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>

namespace eloc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

inline double phi(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double dphi(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

void check_conv_inputs(const Tensor& w, const E2EParams& params) {
    if (w.rank() != 2 || w.rows() != w.cols()) {
        throw dimension_error("e2e expects a square connectivity matrix, got " + w.shape_str());
    }
    if (w.requires_grad()) {
        throw config_error("connectivity input must not require grad");
    }
    const int n = w.rows();
    if (params.row_filters.rank() != 2 || params.col_filters.rank() != 2 ||
        params.row_filters.dim(1) != n || params.col_filters.dim(1) != n ||
        params.row_filters.dim(0) != params.col_filters.dim(0) ||
        params.bias.dim(0) != params.row_filters.dim(0)) {
        throw dimension_error("e2e filter shapes " + params.row_filters.shape_str() + "/" +
                              params.col_filters.shape_str() + " do not match input " +
                              w.shape_str());
    }
}

// Row/column neighborhood sums: U(f,i) = sum_n r^f_n W_{i,n},
// V(f,j) = sum_n c^f_n W_{n,j}.
void e2e_uv(const Tensor& w, const E2EParams& params, RowMat& u, RowMat& v) {
    const int n = w.rows();
    const int f_count = params.row_filters.dim(0);
    CMatMap wm(w.data(), n, n);
    CMatMap r(params.row_filters.data(), f_count, n);
    CMatMap c(params.col_filters.data(), f_count, n);
    u.noalias() = r * wm.transpose();
    v.noalias() = c * wm;
}

}  // namespace

Tensor e2e_forward(Graph& g, const Tensor& w, const E2EParams& params, double slope) {
    check_conv_inputs(w, params);
    const int n = w.rows();
    const int f_count = params.row_filters.dim(0);

    auto u = std::make_shared<RowMat>(f_count, n);
    auto v = std::make_shared<RowMat>(f_count, n);
    e2e_uv(w, params, *u, *v);

    auto preact = std::make_shared<std::vector<double>>(
        static_cast<size_t>(f_count) * n * n);
    Tensor out({f_count, n, n});
    for (int f = 0; f < f_count; ++f) {
        const double b = params.bias.at(f);
        for (int i = 0; i < n; ++i) {
            const double ui = (*u)(f, i);
            double* s_row = preact->data() + (static_cast<size_t>(f) * n + i) * n;
            double* o_row = out.data() + (static_cast<size_t>(f) * n + i) * n;
            for (int j = 0; j < n; ++j) {
                const double s = ui + (*v)(f, j) + b;
                s_row[j] = s;
                o_row[j] = phi(s, slope);
            }
        }
    }

    if (g.tracked(params.row_filters) || g.tracked(params.col_filters) ||
        g.tracked(params.bias)) {
        auto pw = w.payload();
        auto pr = params.row_filters.payload();
        auto pc = params.col_filters.payload();
        auto pb = params.bias.payload();
        auto po = out.payload();
        g.record(out, [pw, pr, pc, pb, po, preact, n, f_count, slope]() {
            RowMat du = RowMat::Zero(f_count, n);
            RowMat dv = RowMat::Zero(f_count, n);
            if (pb->grad.empty()) pb->grad.assign(pb->values.size(), 0.0);
            auto& gb = pb->grad;
            for (int f = 0; f < f_count; ++f) {
                double db = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double* s_row = preact->data() + (static_cast<size_t>(f) * n + i) * n;
                    const double* g_row = po->grad.data() + (static_cast<size_t>(f) * n + i) * n;
                    double du_fi = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double sh = g_row[j] * dphi(s_row[j], slope);
                        du_fi += sh;
                        dv(f, j) += sh;
                        db += sh;
                    }
                    du(f, i) += du_fi;
                }
                gb[static_cast<size_t>(f)] += db;
            }
            CMatMap wm(pw->values.data(), n, n);
            if (pr->requires_grad) {
                if (pr->grad.empty()) pr->grad.assign(pr->values.size(), 0.0);
                MatMap(pr->grad.data(), f_count, n).noalias() += du * wm;
            }
            if (pc->requires_grad) {
                if (pc->grad.empty()) pc->grad.assign(pc->values.size(), 0.0);
                MatMap(pc->grad.data(), f_count, n).noalias() += dv * wm.transpose();
            }
        });
    }
    return out;
}

Tensor e2n_forward(Graph& g, const Tensor& maps, const E2NParams& params, double slope) {
    if (maps.rank() != 3 || maps.dim(1) != maps.dim(2)) {
        throw dimension_error("e2n expects stacked {F,N,N} maps, got " + maps.shape_str());
    }
    const int f_count = maps.dim(0);
    const int n = maps.dim(1);
    const bool mixing = params.filters.rank() == 3;
    if (mixing) {
        if (params.filters.dim(0) != f_count || params.filters.dim(1) != f_count ||
            params.filters.dim(2) != n) {
            throw dimension_error("e2n mixing filters " + params.filters.shape_str() +
                                  " do not match input " + maps.shape_str());
        }
    } else if (params.filters.rank() != 2 || params.filters.dim(0) != f_count ||
               params.filters.dim(1) != n) {
        throw dimension_error("e2n filters " + params.filters.shape_str() +
                              " do not match input " + maps.shape_str());
    }
    if (params.bias.dim(0) != f_count) {
        throw dimension_error("e2n bias " + params.bias.shape_str() + " needs " +
                              std::to_string(f_count) + " entries");
    }

    auto preact = std::make_shared<std::vector<double>>(static_cast<size_t>(f_count) * n);
    Tensor out({f_count, n});
    for (int f = 0; f < f_count; ++f) {
        for (int i = 0; i < n; ++i) {
            double acc = params.bias.at(f);
            if (mixing) {
                for (int fp = 0; fp < f_count; ++fp) {
                    const double* h_row = maps.data() + (static_cast<size_t>(fp) * n + i) * n;
                    const double* g_row =
                        params.filters.data() + (static_cast<size_t>(f) * f_count + fp) * n;
                    for (int j = 0; j < n; ++j) acc += g_row[j] * h_row[j];
                }
            } else {
                const double* h_row = maps.data() + (static_cast<size_t>(f) * n + i) * n;
                const double* g_row = params.filters.data() + static_cast<size_t>(f) * n;
                for (int j = 0; j < n; ++j) acc += g_row[j] * h_row[j];
            }
            (*preact)[static_cast<size_t>(f) * n + i] = acc;
            out.at(f, i) = phi(acc, slope);
        }
    }

    if (g.tracked(maps) || g.tracked(params.filters) || g.tracked(params.bias)) {
        auto pm = maps.payload();
        auto pf = params.filters.payload();
        auto pb = params.bias.payload();
        auto po = out.payload();
        const bool tm = g.tracked(maps), tf = g.tracked(params.filters),
                   tb = g.tracked(params.bias);
        g.record(out, [pm, pf, pb, po, preact, f_count, n, mixing, tm, tf, tb, slope]() {
            std::vector<double> zhat(static_cast<size_t>(f_count) * n);
            for (size_t k = 0; k < zhat.size(); ++k) {
                zhat[k] = po->grad[k] * dphi((*preact)[k], slope);
            }
            if (tb) {
                if (pb->grad.empty()) pb->grad.assign(pb->values.size(), 0.0);
                for (int f = 0; f < f_count; ++f) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) acc += zhat[static_cast<size_t>(f) * n + i];
                    pb->grad[static_cast<size_t>(f)] += acc;
                }
            }
            if (tf && pf->grad.empty()) pf->grad.assign(pf->values.size(), 0.0);
            if (tm && pm->grad.empty()) pm->grad.assign(pm->values.size(), 0.0);
            for (int f = 0; f < f_count; ++f) {
                for (int i = 0; i < n; ++i) {
                    const double z = zhat[static_cast<size_t>(f) * n + i];
                    if (z == 0.0) continue;
                    if (mixing) {
                        for (int fp = 0; fp < f_count; ++fp) {
                            const size_t h_base = (static_cast<size_t>(fp) * n + i) * n;
                            const size_t g_base = (static_cast<size_t>(f) * f_count + fp) * n;
                            for (int j = 0; j < n; ++j) {
                                if (tf) pf->grad[g_base + j] += z * pm->values[h_base + j];
                                if (tm) pm->grad[h_base + j] += z * pf->values[g_base + j];
                            }
                        }
                    } else {
                        const size_t h_base = (static_cast<size_t>(f) * n + i) * n;
                        const size_t g_base = static_cast<size_t>(f) * n;
                        for (int j = 0; j < n; ++j) {
                            if (tf) pf->grad[g_base + j] += z * pm->values[h_base + j];
                            if (tm) pm->grad[h_base + j] += z * pf->values[g_base + j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor n2g_forward(Graph& g, const Tensor& node_features, const N2GParams& params, double slope) {
    if (node_features.rank() != 2) {
        throw dimension_error("n2g expects {F,N} node features, got " + node_features.shape_str());
    }
    const int f_count = node_features.dim(0);
    const int n = node_features.dim(1);
    if (params.filters.rank() != 2 || params.filters.dim(0) != f_count ||
        params.filters.dim(1) != n || params.bias.dim(0) != f_count) {
        throw dimension_error("n2g filters " + params.filters.shape_str() +
                              " do not match input " + node_features.shape_str());
    }

    auto preact = std::make_shared<std::vector<double>>(static_cast<size_t>(f_count));
    Tensor out({f_count});
    for (int f = 0; f < f_count; ++f) {
        double acc = params.bias.at(f);
        const double* h_row = node_features.data() + static_cast<size_t>(f) * n;
        const double* k_row = params.filters.data() + static_cast<size_t>(f) * n;
        for (int j = 0; j < n; ++j) acc += k_row[j] * h_row[j];
        (*preact)[static_cast<size_t>(f)] = acc;
        out.at(f) = phi(acc, slope);
    }

    if (g.tracked(node_features) || g.tracked(params.filters) || g.tracked(params.bias)) {
        auto ph = node_features.payload();
        auto pk = params.filters.payload();
        auto pb = params.bias.payload();
        auto po = out.payload();
        const bool th = g.tracked(node_features), tk = g.tracked(params.filters),
                   tb = g.tracked(params.bias);
        g.record(out, [ph, pk, pb, po, preact, f_count, n, th, tk, tb, slope]() {
            if (tb && pb->grad.empty()) pb->grad.assign(pb->values.size(), 0.0);
            if (tk && pk->grad.empty()) pk->grad.assign(pk->values.size(), 0.0);
            if (th && ph->grad.empty()) ph->grad.assign(ph->values.size(), 0.0);
            for (int f = 0; f < f_count; ++f) {
                const double z = po->grad[static_cast<size_t>(f)] *
                                 dphi((*preact)[static_cast<size_t>(f)], slope);
                if (z == 0.0) continue;
                if (tb) pb->grad[static_cast<size_t>(f)] += z;
                const size_t base = static_cast<size_t>(f) * n;
                for (int j = 0; j < n; ++j) {
                    if (tk) pk->grad[base + j] += z * ph->values[base + j];
                    if (th) ph->grad[base + j] += z * pk->values[base + j];
                }
            }
        });
    }
    return out;
}

Tensor nodewise_fc(Graph& g, const Tensor& x, const Tensor& weights, const Tensor& bias,
                   double slope) {
    return g.leaky_relu(g.add_bias_rows(g.matmul(x, weights), bias), slope);
}

Tensor nodewise_affine(Graph& g, const Tensor& x, const Tensor& weights, const Tensor& bias) {
    return g.add_bias_rows(g.matmul(x, weights), bias);
}

namespace {

// Row kernels for the fused layer, kept as standalone functions so the
// compiler sees clean restrict-qualified pointers and vectorizes the j loops.
double fused_forward_row(int n, double slope, double ui_b, double p,
                         const double* __restrict v_row, const double* __restrict g_row) {
    // z_i = sum_j g_j * phi(u_i + v_j + b) + p, with phi(x) = x * m(x).
    constexpr int kLanes = 8;
    double lanes[kLanes] = {0, 0, 0, 0, 0, 0, 0, 0};
    int j = 0;
    for (; j + kLanes <= n; j += kLanes) {
        for (int l = 0; l < kLanes; ++l) {
            const double s = ui_b + v_row[j + l];
            const double m = s >= 0.0 ? 1.0 : slope;
            lanes[l] += g_row[j + l] * (s * m);
        }
    }
    double tail = 0.0;
    for (; j < n; ++j) {
        const double s = ui_b + v_row[j];
        const double m = s >= 0.0 ? 1.0 : slope;
        tail += g_row[j] * (s * m);
    }
    const double head = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                        ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    return head + tail + p;
}

double fused_backward_row(int n, double slope, double ui_b, double zh,
                          const double* __restrict v_row, const double* __restrict g_row,
                          double* __restrict dg_row, double* __restrict dv_row) {
    // Accumulates dg_j += zh*H_j and dv_j += zh*g_j*m_j; returns sum_j g_j*m_j.
    constexpr int kLanes = 8;
    double lanes[kLanes] = {0, 0, 0, 0, 0, 0, 0, 0};
    int j = 0;
    for (; j + kLanes <= n; j += kLanes) {
        for (int l = 0; l < kLanes; ++l) {
            const double s = ui_b + v_row[j + l];
            const double m = s >= 0.0 ? 1.0 : slope;
            dg_row[j + l] += zh * (s * m);
            const double gm = g_row[j + l] * m;
            dv_row[j + l] += zh * gm;
            lanes[l] += gm;
        }
    }
    double tail = 0.0;
    for (; j < n; ++j) {
        const double s = ui_b + v_row[j];
        const double m = s >= 0.0 ? 1.0 : slope;
        dg_row[j] += zh * (s * m);
        const double gm = g_row[j] * m;
        dv_row[j] += zh * gm;
        tail += gm;
    }
    const double head = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                        ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    return head + tail;
}

}  // namespace

Tensor e2e_e2n_fused(Graph& g, const Tensor& w, const E2EParams& e2e, const E2NParams& e2n,
                     double slope) {
    check_conv_inputs(w, e2e);
    if (e2n.filters.rank() != 2) {
        throw config_error("fused e2e+e2n supports channel-wise e2n filters only");
    }
    const int n = w.rows();
    const int f_count = e2e.row_filters.dim(0);
    if (e2n.filters.dim(0) != f_count || e2n.filters.dim(1) != n ||
        e2n.bias.dim(0) != f_count) {
        throw dimension_error("e2n filters " + e2n.filters.shape_str() + " do not match e2e " +
                              e2e.row_filters.shape_str());
    }

    auto u = std::make_shared<RowMat>(f_count, n);
    auto v = std::make_shared<RowMat>(f_count, n);
    e2e_uv(w, e2e, *u, *v);

    // z^f_i = sum_j g^f_j phi(u^f_i + v^f_j + b_f) + p_f; output phi(z), {F,N}.
    auto preact = std::make_shared<std::vector<double>>(static_cast<size_t>(f_count) * n);
    Tensor out({f_count, n});
    for (int f = 0; f < f_count; ++f) {
        const double b = e2e.bias.at(f);
        const double p = e2n.bias.at(f);
        const double* v_row = v->data() + static_cast<size_t>(f) * n;
        const double* g_row = e2n.filters.data() + static_cast<size_t>(f) * n;
        const double* u_row = u->data() + static_cast<size_t>(f) * n;
        double* z_row = preact->data() + static_cast<size_t>(f) * n;
        double* o_row = out.data() + static_cast<size_t>(f) * n;
        for (int i = 0; i < n; ++i) {
            const double z = fused_forward_row(n, slope, u_row[i] + b, p, v_row, g_row);
            z_row[i] = z;
            o_row[i] = phi(z, slope);
        }
    }

    const bool any_tracked = g.tracked(e2e.row_filters) || g.tracked(e2e.col_filters) ||
                             g.tracked(e2e.bias) || g.tracked(e2n.filters) ||
                             g.tracked(e2n.bias);
    if (any_tracked) {
        auto pw = w.payload();
        auto pr = e2e.row_filters.payload();
        auto pc = e2e.col_filters.payload();
        auto pb = e2e.bias.payload();
        auto pg = e2n.filters.payload();
        auto pp = e2n.bias.payload();
        auto po = out.payload();
        g.record(out, [pw, pr, pc, pb, pg, pp, po, u, v, preact, n, f_count, slope]() {
            RowMat du(f_count, n), dv(f_count, n);
            if (pb->grad.empty()) pb->grad.assign(pb->values.size(), 0.0);
            if (pp->grad.empty()) pp->grad.assign(pp->values.size(), 0.0);
            if (pg->grad.empty()) pg->grad.assign(pg->values.size(), 0.0);
            for (int f = 0; f < f_count; ++f) {
                const double b = pb->values[static_cast<size_t>(f)];
                const double* u_row = u->data() + static_cast<size_t>(f) * n;
                const double* v_row = v->data() + static_cast<size_t>(f) * n;
                const double* g_row = pg->values.data() + static_cast<size_t>(f) * n;
                const double* z_row = preact->data() + static_cast<size_t>(f) * n;
                const double* out_adj = po->grad.data() + static_cast<size_t>(f) * n;
                double* dg_row = pg->grad.data() + static_cast<size_t>(f) * n;
                double* dv_row = dv.data() + static_cast<size_t>(f) * n;
                double* du_row = du.data() + static_cast<size_t>(f) * n;
                std::fill(dv_row, dv_row + n, 0.0);
                double db = 0.0, dp = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double zh = out_adj[i] * dphi(z_row[i], slope);
                    if (zh == 0.0) {
                        du_row[i] = 0.0;
                        continue;
                    }
                    dp += zh;
                    const double gm_sum = fused_backward_row(n, slope, u_row[i] + b, zh, v_row,
                                                             g_row, dg_row, dv_row);
                    const double du_fi = zh * gm_sum;
                    du_row[i] = du_fi;
                    db += du_fi;
                }
                pb->grad[static_cast<size_t>(f)] += db;
                pp->grad[static_cast<size_t>(f)] += dp;
            }
            CMatMap wm(pw->values.data(), n, n);
            if (pr->grad.empty()) pr->grad.assign(pr->values.size(), 0.0);
            if (pc->grad.empty()) pc->grad.assign(pc->values.size(), 0.0);
            MatMap(pr->grad.data(), f_count, n).noalias() += du * wm;
            MatMap(pc->grad.data(), f_count, n).noalias() += dv * wm.transpose();
        });
    }
    return out;
}


AttentionPair lstm_attention(Graph& g, const Tensor& q_seq, const LstmParams& params) {
    if (q_seq.rank() != 2) {
        throw dimension_error("lstm input must be {T,F}, got " + q_seq.shape_str());
    }
    if (params.layers.empty()) throw config_error("lstm needs at least one layer");
    if (params.layers.back().hidden_size() != 2) {
        throw config_error("final lstm layer must output 2 channels, got " +
                           std::to_string(params.layers.back().hidden_size()));
    }
    const int t_count = q_seq.rows();

    Tensor layer_input = q_seq;
    for (const LstmLayerParams& layer : params.layers) {
        const int hidden = layer.hidden_size();
        if (layer.input_size() != layer_input.cols()) {
            throw dimension_error("lstm layer expects input width " +
                                  std::to_string(layer.input_size()) + ", got " +
                                  layer_input.shape_str());
        }
        Tensor h = Tensor::zeros({1, hidden});
        Tensor c = Tensor::zeros({1, hidden});
        std::vector<Tensor> outputs;
        outputs.reserve(static_cast<size_t>(t_count));
        for (int t = 0; t < t_count; ++t) {
            Tensor x_t = g.slice_rows(layer_input, t, t + 1);
            Tensor z = g.add_bias_rows(
                g.add(g.matmul(x_t, layer.w_input), g.matmul(h, layer.w_hidden)), layer.bias);
            Tensor in_gate = g.sigmoid(g.slice_cols(z, 0, hidden));
            Tensor forget_gate = g.sigmoid(g.slice_cols(z, hidden, 2 * hidden));
            Tensor cell_cand = g.tanh(g.slice_cols(z, 2 * hidden, 3 * hidden));
            Tensor out_gate = g.sigmoid(g.slice_cols(z, 3 * hidden, 4 * hidden));
            c = g.add(g.mul(forget_gate, c), g.mul(in_gate, cell_cand));
            h = g.mul(out_gate, g.tanh(c));
            outputs.push_back(h);
        }
        layer_input = g.concat_rows(outputs);
    }

    Tensor attn = g.softmax(layer_input, 0);  // over time, per column
    AttentionPair pair;
    pair.language = g.reshape(g.slice_cols(attn, 0, 1), {t_count});
    pair.motor = g.reshape(g.slice_cols(attn, 1, 2), {t_count});
    return pair;
}

}  // namespace eloc

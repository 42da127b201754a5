#include "eloc/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <utility>

namespace eloc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

using Payload = std::shared_ptr<Tensor::Payload>;

std::vector<double>& adjoint_of(const Payload& p) {
    if (p->grad.empty()) p->grad.assign(p->values.size(), 0.0);
    return p->grad;
}

void release_adjoint(const Payload& p) {
    std::vector<double>().swap(p->grad);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw dimension_error(std::string(op) + " shape mismatch: " + a.shape_str() +
                              " vs " + b.shape_str());
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::vector<double>& Graph::adjoint(const Tensor& t) { return adjoint_of(t.payload()); }

bool Graph::has_adjoint(const Tensor& t) { return !t.payload()->grad.empty(); }

void Graph::record(const Tensor& out, std::function<void()> step) {
    out.payload()->requires_grad = true;
    tape_.push_back(Node{out.payload(), std::move(step)});
}

void Graph::backward(const Tensor& loss) {
    if (consumed_) {
        throw numeric_error("backward called twice on the same graph; re-run the forward pass first");
    }
    if (loss.size() != 1) {
        throw dimension_error("backward requires a scalar loss, got " + loss.shape_str());
    }
    if (!loss.requires_grad()) {
        throw numeric_error("loss does not depend on any tracked tensor");
    }
    consumed_ = true;
    adjoint_of(loss.payload())[0] = 1.0;
    for (size_t k = tape_.size(); k-- > 0;) {
        Node& node = tape_[k];
        // An output whose adjoint was never touched contributes nothing.
        if (!node.out->grad.empty()) {
            node.step();
            release_adjoint(node.out);
        }
        node.step = nullptr;
    }
}

// ---------------------------------------------------------------------------

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw dimension_error("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    MatMap(out.data(), m, n).noalias() = CMatMap(a.data(), m, k) * CMatMap(b.data(), k, n);
    if (tracked(a) || tracked(b)) {
        auto pa = a.payload(), pb = b.payload(), po = out.payload();
        const bool ta = tracked(a), tb = tracked(b);
        record(out, [pa, pb, po, m, k, n, ta, tb]() {
            CMatMap g(po->grad.data(), m, n);
            if (ta) {
                MatMap(adjoint_of(pa).data(), m, k).noalias() +=
                    g * CMatMap(pb->values.data(), k, n).transpose();
            }
            if (tb) {
                MatMap(adjoint_of(pb).data(), k, n).noalias() +=
                    CMatMap(pa->values.data(), m, k).transpose() * g;
            }
        });
    }
    return out;
}

Tensor Graph::transpose(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out({n, m});
    MatMap(out.data(), n, m) = CMatMap(a.data(), m, n).transpose();
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        record(out, [pa, po, m, n]() {
            MatMap(adjoint_of(pa).data(), m, n) += CMatMap(po->grad.data(), n, m).transpose();
        });
    }
    return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (tracked(a) || tracked(b)) {
        auto pa = a.payload(), pb = b.payload(), po = out.payload();
        const bool ta = tracked(a), tb = tracked(b);
        record(out, [pa, pb, po, nn, ta, tb]() {
            if (ta) {
                auto& ga = adjoint_of(pa);
                for (size_t i = 0; i < nn; ++i) ga[i] += po->grad[i];
            }
            if (tb) {
                auto& gb = adjoint_of(pb);
                for (size_t i = 0; i < nn; ++i) gb[i] += po->grad[i];
            }
        });
    }
    return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (tracked(a) || tracked(b)) {
        auto pa = a.payload(), pb = b.payload(), po = out.payload();
        const bool ta = tracked(a), tb = tracked(b);
        record(out, [pa, pb, po, nn, ta, tb]() {
            if (ta) {
                auto& ga = adjoint_of(pa);
                for (size_t i = 0; i < nn; ++i) ga[i] += po->grad[i];
            }
            if (tb) {
                auto& gb = adjoint_of(pb);
                for (size_t i = 0; i < nn; ++i) gb[i] -= po->grad[i];
            }
        });
    }
    return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (tracked(a) || tracked(b)) {
        auto pa = a.payload(), pb = b.payload(), po = out.payload();
        const bool ta = tracked(a), tb = tracked(b);
        record(out, [pa, pb, po, nn, ta, tb]() {
            if (ta) {
                auto& ga = adjoint_of(pa);
                for (size_t i = 0; i < nn; ++i) ga[i] += po->grad[i] * pb->values[i];
            }
            if (tb) {
                auto& gb = adjoint_of(pb);
                for (size_t i = 0; i < nn; ++i) gb[i] += po->grad[i] * pa->values[i];
            }
        });
    }
    return out;
}

Tensor Graph::scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) out.data()[i] = s * a.data()[i];
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        record(out, [pa, po, nn, s]() {
            auto& ga = adjoint_of(pa);
            for (size_t i = 0; i < nn; ++i) ga[i] += s * po->grad[i];
        });
    }
    return out;
}

Tensor Graph::add_bias_rows(const Tensor& a, const Tensor& bias) {
    if (a.rank() != 2 || bias.rank() != 1 || bias.dim(0) != a.cols()) {
        throw dimension_error("add_bias_rows shape mismatch: " + a.shape_str() + " + " +
                              bias.shape_str());
    }
    const int m = a.rows(), n = a.cols();
    Tensor out({m, n});
    {
        const double* src = a.data();
        const double* b = bias.data();
        double* dst = out.data();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                dst[static_cast<size_t>(i) * n + j] = src[static_cast<size_t>(i) * n + j] + b[j];
            }
        }
    }
    if (tracked(a) || tracked(bias)) {
        auto pa = a.payload(), pb = bias.payload(), po = out.payload();
        const bool ta = tracked(a), tb = tracked(bias);
        record(out, [pa, pb, po, m, n, ta, tb]() {
            if (ta) {
                auto& ga = adjoint_of(pa);
                for (size_t i = 0; i < static_cast<size_t>(m) * n; ++i) ga[i] += po->grad[i];
            }
            if (tb) {
                auto& gb = adjoint_of(pb);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) gb[j] += po->grad[static_cast<size_t>(i) * n + j];
                }
            }
        });
    }
    return out;
}

Tensor Graph::leaky_relu(const Tensor& a, double slope) {
    if (!std::isfinite(slope)) throw numeric_error("leaky_relu slope must be finite");
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) {
        const double x = a.data()[i];
        out.data()[i] = x > 0.0 ? x : slope * x;
    }
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        // x == 0 uses the positive-side derivative 1.
        record(out, [pa, po, nn, slope]() {
            auto& ga = adjoint_of(pa);
            for (size_t i = 0; i < nn; ++i) {
                ga[i] += po->grad[i] * (pa->values[i] >= 0.0 ? 1.0 : slope);
            }
        });
    }
    return out;
}

Tensor Graph::sigmoid(const Tensor& a) {
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) out.data()[i] = stable_sigmoid(a.data()[i]);
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        record(out, [pa, po, nn]() {
            auto& ga = adjoint_of(pa);
            for (size_t i = 0; i < nn; ++i) {
                const double y = po->values[i];
                ga[i] += po->grad[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

Tensor Graph::tanh(const Tensor& a) {
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) out.data()[i] = std::tanh(a.data()[i]);
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        record(out, [pa, po, nn]() {
            auto& ga = adjoint_of(pa);
            for (size_t i = 0; i < nn; ++i) {
                const double y = po->values[i];
                ga[i] += po->grad[i] * (1.0 - y * y);
            }
        });
    }
    return out;
}

Tensor Graph::log_sigmoid(const Tensor& a) {
    Tensor out(a.shape());
    const size_t nn = a.values().size();
    for (size_t i = 0; i < nn; ++i) {
        const double x = a.data()[i];
        out.data()[i] = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    }
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        record(out, [pa, po, nn]() {
            auto& ga = adjoint_of(pa);
            for (size_t i = 0; i < nn; ++i) {
                ga[i] += po->grad[i] * stable_sigmoid(-pa->values[i]);
            }
        });
    }
    return out;
}

namespace {

// Iterate the slices of a rank-1 or rank-2 tensor along `axis`.
// fn(base_index, stride, count) is called once per slice.
template <typename F>
void for_each_slice(const std::vector<int>& shape, int axis, F&& fn) {
    if (shape.size() == 1) {
        if (axis != 0) throw dimension_error("softmax axis " + std::to_string(axis) +
                                             " invalid for " + shape_to_string(shape));
        fn(0, 1, shape[0]);
        return;
    }
    if (shape.size() == 2) {
        const int m = shape[0], n = shape[1];
        if (axis == 0) {
            for (int j = 0; j < n; ++j) fn(j, n, m);
        } else if (axis == 1) {
            for (int i = 0; i < m; ++i) fn(static_cast<size_t>(i) * n, 1, n);
        } else {
            throw dimension_error("softmax axis " + std::to_string(axis) + " invalid for " +
                                  shape_to_string(shape));
        }
        return;
    }
    throw dimension_error("softmax supports rank 1 or 2 tensors, got " + shape_to_string(shape));
}

}  // namespace

Tensor Graph::softmax(const Tensor& a, int axis) {
    Tensor out(a.shape());
    for_each_slice(a.shape(), axis, [&](size_t base, size_t stride, int count) {
        double mx = a.data()[base];
        for (int i = 1; i < count; ++i) mx = std::max(mx, a.data()[base + stride * i]);
        double total = 0.0;
        for (int i = 0; i < count; ++i) {
            const double e = std::exp(a.data()[base + stride * i] - mx);
            out.data()[base + stride * i] = e;
            total += e;
        }
        for (int i = 0; i < count; ++i) out.data()[base + stride * i] /= total;
    });
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        auto shape = a.shape();
        record(out, [pa, po, shape, axis]() {
            auto& ga = adjoint_of(pa);
            for_each_slice(shape, axis, [&](size_t base, size_t stride, int count) {
                double dot = 0.0;
                for (int i = 0; i < count; ++i) {
                    const size_t k = base + stride * i;
                    dot += po->grad[k] * po->values[k];
                }
                for (int i = 0; i < count; ++i) {
                    const size_t k = base + stride * i;
                    ga[k] += po->values[k] * (po->grad[k] - dot);
                }
            });
        });
    }
    return out;
}

Tensor Graph::log_softmax(const Tensor& a, int axis) {
    Tensor out(a.shape());
    for_each_slice(a.shape(), axis, [&](size_t base, size_t stride, int count) {
        double mx = a.data()[base];
        for (int i = 1; i < count; ++i) mx = std::max(mx, a.data()[base + stride * i]);
        double total = 0.0;
        for (int i = 0; i < count; ++i) total += std::exp(a.data()[base + stride * i] - mx);
        const double lse = mx + std::log(total);
        for (int i = 0; i < count; ++i) {
            const size_t k = base + stride * i;
            out.data()[k] = a.data()[k] - lse;
        }
    });
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        auto shape = a.shape();
        record(out, [pa, po, shape, axis]() {
            auto& ga = adjoint_of(pa);
            for_each_slice(shape, axis, [&](size_t base, size_t stride, int count) {
                double gsum = 0.0;
                for (int i = 0; i < count; ++i) gsum += po->grad[base + stride * i];
                for (int i = 0; i < count; ++i) {
                    const size_t k = base + stride * i;
                    ga[k] += po->grad[k] - std::exp(po->values[k]) * gsum;
                }
            });
        });
    }
    return out;
}

Tensor Graph::sum(const Tensor& a) {
    Tensor out({1});
    double total = 0.0;
    for (double v : a.values()) total += v;
    out.at(0) = total;
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        const size_t nn = a.values().size();
        record(out, [pa, po, nn]() {
            auto& ga = adjoint_of(pa);
            const double g = po->grad[0];
            for (size_t i = 0; i < nn; ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor Graph::slice_rows(const Tensor& a, int r0, int r1) {
    const int m = a.rows(), n = a.cols();
    if (r0 < 0 || r1 > m || r0 >= r1) {
        throw dimension_error("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                              ") invalid for " + a.shape_str());
    }
    Tensor out({r1 - r0, n});
    std::copy(a.data() + static_cast<size_t>(r0) * n, a.data() + static_cast<size_t>(r1) * n,
              out.data());
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        record(out, [pa, po, r0, r1, n]() {
            auto& ga = adjoint_of(pa);
            const size_t count = static_cast<size_t>(r1 - r0) * n;
            for (size_t i = 0; i < count; ++i) ga[static_cast<size_t>(r0) * n + i] += po->grad[i];
        });
    }
    return out;
}

Tensor Graph::slice_cols(const Tensor& a, int c0, int c1) {
    const int m = a.rows(), n = a.cols();
    if (c0 < 0 || c1 > n || c0 >= c1) {
        throw dimension_error("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                              ") invalid for " + a.shape_str());
    }
    const int w = c1 - c0;
    Tensor out({m, w});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < w; ++j) out.at(i, j) = a.at(i, c0 + j);
    }
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        record(out, [pa, po, m, n, c0, w]() {
            auto& ga = adjoint_of(pa);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < w; ++j) {
                    ga[static_cast<size_t>(i) * n + c0 + j] += po->grad[static_cast<size_t>(i) * w + j];
                }
            }
        });
    }
    return out;
}

Tensor Graph::concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw dimension_error("concat_rows of zero tensors");
    const int n = parts[0].cols();
    int m = 0;
    bool any_tracked = false;
    for (const auto& p : parts) {
        if (p.cols() != n) {
            throw dimension_error("concat_rows column mismatch: " + parts[0].shape_str() + " vs " +
                                  p.shape_str());
        }
        m += p.rows();
        any_tracked = any_tracked || tracked(p);
    }
    Tensor out({m, n});
    size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out.data() + offset);
        offset += p.values().size();
    }
    if (any_tracked) {
        std::vector<std::shared_ptr<Tensor::Payload>> pp;
        std::vector<bool> tt;
        pp.reserve(parts.size());
        for (const auto& p : parts) {
            pp.push_back(p.payload());
            tt.push_back(tracked(p));
        }
        auto po = out.payload();
        record(out, [pp, tt, po]() {
            size_t off = 0;
            for (size_t k = 0; k < pp.size(); ++k) {
                const size_t cnt = pp[k]->values.size();
                if (tt[k]) {
                    auto& g = adjoint_of(pp[k]);
                    for (size_t i = 0; i < cnt; ++i) g[i] += po->grad[off + i];
                }
                off += cnt;
            }
        });
    }
    return out;
}

Tensor Graph::reshape(const Tensor& a, std::vector<int> shape) {
    if (shape_product(shape) != a.size()) {
        throw dimension_error("reshape " + a.shape_str() + " -> " + shape_to_string(shape) +
                              " changes element count");
    }
    Tensor out = Tensor::from(std::move(shape), a.values());
    if (tracked(a)) {
        auto pa = a.payload(), po = out.payload();
        const size_t nn = a.values().size();
        record(out, [pa, po, nn]() {
            auto& ga = adjoint_of(pa);
            for (size_t i = 0; i < nn; ++i) ga[i] += po->grad[i];
        });
    }
    return out;
}

}  // namespace eloc

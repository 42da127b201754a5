#include "eloc/connectivity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace eloc {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

TimeSeries::TimeSeries(Tensor d) : data(std::move(d)) {
    if (data.rank() != 2) {
        throw dimension_error("time series must be frames x regions, got " + data.shape_str());
    }
    if (data.dim(1) < 2) throw data_error("time series needs at least 2 regions");
    if (!data.all_finite()) throw data_error("time series contains non-finite values");
}

void WindowConfig::validate() const {
    if (window_length < 2) throw config_error("window length must be >= 2");
    if (stride < 1) throw config_error("window stride must be >= 1");
    if (!(epsilon >= 1.0)) throw config_error("epsilon must be >= 1");
}

void TumorMask::validate(int regions) const {
    std::unordered_set<int> seen;
    for (int idx : region_indices) {
        if (idx < 0 || idx >= regions) {
            throw data_error("tumor mask index " + std::to_string(idx) + " out of range [0," +
                             std::to_string(regions) + ")");
        }
        if (!seen.insert(idx).second) {
            throw data_error("tumor mask index " + std::to_string(idx) + " duplicated");
        }
    }
}

bool TumorMask::contains(int region) const {
    return std::find(region_indices.begin(), region_indices.end(), region) !=
           region_indices.end();
}

int window_count_for(int total_frames, int window_length, int stride) {
    if (total_frames < window_length) return 0;
    return (total_frames - window_length) / stride + 1;
}

std::vector<Tensor> extract_windows(const TimeSeries& ts, const WindowConfig& cfg) {
    cfg.validate();
    const int d_total = ts.frames();
    const int n = ts.regions();
    if (d_total < cfg.window_length) {
        throw data_error("time series too short: " + std::to_string(d_total) + " frames < window " +
                         std::to_string(cfg.window_length));
    }
    const int t_count = window_count_for(d_total, cfg.window_length, cfg.stride);
    std::vector<Tensor> windows;
    windows.reserve(static_cast<size_t>(t_count));
    for (int t = 0; t < t_count; ++t) {
        const int start = t * cfg.stride;
        Tensor w({cfg.window_length, n});
        std::copy(ts.data.data() + static_cast<size_t>(start) * n,
                  ts.data.data() + static_cast<size_t>(start + cfg.window_length) * n, w.data());
        windows.push_back(std::move(w));
    }
    return windows;
}

Tensor similarity_matrix(const Tensor& window, double epsilon, ZeroVariancePolicy policy) {
    if (window.rank() != 2) {
        throw dimension_error("similarity_matrix expects a D x N window, got " + window.shape_str());
    }
    if (!(epsilon >= 1.0)) throw config_error("epsilon must be >= 1");
    const int d = window.rows();
    const int n = window.cols();
    if (d < 2) throw data_error("window must have at least 2 frames");

    // Z-score each region column, scaled so that X^T X is the correlation.
    RowMat x(d, n);
    std::vector<char> degenerate(static_cast<size_t>(n), 0);
    for (int j = 0; j < n; ++j) {
        double mean = 0.0;
        for (int i = 0; i < d; ++i) mean += window.at(i, j);
        mean /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) {
            const double c = window.at(i, j) - mean;
            var += c * c;
        }
        if (var <= 0.0) {
            if (policy == ZeroVariancePolicy::error) {
                throw data_error("region " + std::to_string(j) +
                                 " has zero variance within a window");
            }
            degenerate[static_cast<size_t>(j)] = 1;
            for (int i = 0; i < d; ++i) x(i, j) = 0.0;
            continue;
        }
        const double inv = 1.0 / std::sqrt(var);
        for (int i = 0; i < d; ++i) x(i, j) = (window.at(i, j) - mean) * inv;
    }

    RowMat rho = x.transpose() * x;

    Tensor w({n, n});
    const double inv_eps = 1.0 / epsilon;
    for (int i = 0; i < n; ++i) {
        w.at(i, i) = degenerate[static_cast<size_t>(i)] ? 0.0 : 1.0;
        for (int j = i + 1; j < n; ++j) {
            double v;
            if (degenerate[static_cast<size_t>(i)] || degenerate[static_cast<size_t>(j)]) {
                v = 0.0;
            } else {
                const double r = std::clamp(rho(i, j), -1.0, 1.0);
                v = std::exp((r - 1.0) * inv_eps);
            }
            w.at(i, j) = v;
            w.at(j, i) = v;
        }
    }
    return w;
}

Tensor apply_tumor_mask(const Tensor& w, const TumorMask& mask) {
    if (w.rank() != 2 || w.rows() != w.cols()) {
        throw dimension_error("tumor mask expects a square matrix, got " + w.shape_str());
    }
    const int n = w.rows();
    mask.validate(n);
    Tensor out = w.clone();
    for (int idx : mask.region_indices) {
        for (int j = 0; j < n; ++j) {
            out.at(idx, j) = 0.0;
            out.at(j, idx) = 0.0;
        }
    }
    return out;
}

DynamicConnectivity build_dynamic_connectivity(const TimeSeries& ts, const WindowConfig& cfg,
                                               const TumorMask& mask) {
    mask.validate(ts.regions());
    DynamicConnectivity dc;
    for (const Tensor& window : extract_windows(ts, cfg)) {
        dc.matrices.push_back(
            apply_tumor_mask(similarity_matrix(window, cfg.epsilon, cfg.on_zero_variance), mask));
    }
    return dc;
}

}  // namespace eloc

#pragma once

#include <vector>

#include "eloc/tensor.hpp"

namespace eloc {

// Per-patient region time courses, frames x regions.
struct TimeSeries {
    Tensor data;  // shape {frames, regions}

    TimeSeries() = default;
    explicit TimeSeries(Tensor d);

    int frames() const { return data.dim(0); }
    int regions() const { return data.dim(1); }
};

enum class ZeroVariancePolicy {
    error,        // degenerate region inside a window is a hard error
    mask_window,  // zero that region's row/column for the affected window
};

struct WindowConfig {
    int window_length = 45;  // D
    int stride = 5;
    double epsilon = 1.0;  // decay control, >= 1
    ZeroVariancePolicy on_zero_variance = ZeroVariancePolicy::error;

    void validate() const;
};

struct TumorMask {
    std::vector<int> region_indices;  // unique, in [0, regions)

    void validate(int regions) const;
    bool contains(int region) const;
};

// Ordered sequence of masked similarity matrices, one per sliding window.
struct DynamicConnectivity {
    std::vector<Tensor> matrices;  // each {N, N}, symmetric, masked

    int window_count() const { return static_cast<int>(matrices.size()); }
    int regions() const { return matrices.empty() ? 0 : matrices[0].dim(0); }
};

// Number of full left-aligned windows; trailing frames that do not fill a
// final window are dropped.
int window_count_for(int total_frames, int window_length, int stride);

// Window t covers frames [t*stride, t*stride + D).
std::vector<Tensor> extract_windows(const TimeSeries& ts, const WindowConfig& cfg);

// Columns are z-scored within the window and scaled by 1/sqrt(D) so that
// X^T X is the Pearson correlation matrix rho; the output is
// exp((rho - 1) / epsilon) with a unit diagonal. Degenerate regions follow
// the configured policy.
Tensor similarity_matrix(const Tensor& window, double epsilon,
                         ZeroVariancePolicy policy = ZeroVariancePolicy::error);

// Rows and columns at masked indices become exactly zero (diagonal included).
Tensor apply_tumor_mask(const Tensor& w, const TumorMask& mask);

DynamicConnectivity build_dynamic_connectivity(const TimeSeries& ts, const WindowConfig& cfg,
                                               const TumorMask& mask);

}  // namespace eloc

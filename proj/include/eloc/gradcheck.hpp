#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eloc/graph.hpp"

namespace eloc {

struct GradCheckEntry {
    std::string param;
    int index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    double error = 0.0;  // relative, or absolute when both magnitudes < 1e-8
};

struct GradCheckReport {
    double max_error = 0.0;  // relative, absolute when both magnitudes < 1e-8
    GradCheckEntry worst;
    long long entries_checked = 0;
    double tolerance = 0.0;
    bool passed = false;  // max_error < tolerance

    // Auxiliary views for entries near the finite-difference noise floor:
    // the largest absolute disagreement anywhere, and the largest relative
    // error restricted to entries big enough (>= 1e-4) for a central
    // difference at double precision to resolve a relative tolerance.
    double max_abs_diff = 0.0;
    double max_error_significant = 0.0;
};

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Central-difference check of recorded adjoints. `f` builds the scalar loss
// from the current parameter values on the given graph; it must be
// deterministic. Every entry of every parameter is perturbed by +-h and the
// finite-difference estimate is compared against the adjoint from one
// backward pass. Relative error uses max(|analytic|, |numeric|) as the
// denominator; when both magnitudes are below 1e-8 the absolute difference
// is reported instead.
GradCheckReport check_gradients(const std::function<Tensor(Graph&)>& f,
                                const std::vector<NamedParam>& params, double h,
                                double tol = 1e-5);

}  // namespace eloc

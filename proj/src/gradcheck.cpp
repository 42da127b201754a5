#include "eloc/gradcheck.hpp"

#include <cmath>

namespace eloc {

GradCheckReport check_gradients(const std::function<Tensor(Graph&)>& f,
                                const std::vector<NamedParam>& params, double h, double tol) {
    if (!(h >= 1e-8 && h <= 1e-4)) {
        throw config_error("gradient check step h must lie in [1e-8, 1e-4]");
    }

    for (const auto& p : params) {
        if (!p.tensor.requires_grad()) {
            throw config_error("gradient check parameter '" + p.name + "' does not require grad");
        }
        p.tensor.zero_grad();
    }

    const auto eval = [&]() -> double {
        Graph g;
        Tensor loss = f(g);
        if (loss.size() != 1) {
            throw dimension_error("gradient check target must be scalar, got " + loss.shape_str());
        }
        const double v = loss.at(0);
        if (!std::isfinite(v)) throw numeric_error("gradient check target is not finite");
        return v;
    };

    // One analytic pass.
    {
        Graph g;
        Tensor loss = f(g);
        if (loss.size() != 1) {
            throw dimension_error("gradient check target must be scalar, got " + loss.shape_str());
        }
        if (!std::isfinite(loss.at(0))) throw numeric_error("gradient check target is not finite");
        g.backward(loss);
    }

    GradCheckReport report;
    for (const auto& p : params) {
        Tensor t = p.tensor;
        const std::vector<double> analytic = t.grad();
        for (long long i = 0; i < t.size(); ++i) {
            const double saved = t.at(static_cast<int>(i));
            t.at(static_cast<int>(i)) = saved + h;
            const double fp = eval();
            t.at(static_cast<int>(i)) = saved - h;
            const double fm = eval();
            t.at(static_cast<int>(i)) = saved;

            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[static_cast<size_t>(i)];
            const double scale = std::max(std::abs(a), std::abs(numeric));
            const double err = scale < 1e-8 ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
            ++report.entries_checked;
            if (err > report.max_error) {
                report.max_error = err;
                report.worst = GradCheckEntry{p.name, static_cast<int>(i), a, numeric, err};
            }
            report.max_abs_diff = std::max(report.max_abs_diff, std::abs(a - numeric));
            if (scale >= 1e-4) {
                report.max_error_significant = std::max(report.max_error_significant, err);
            }
        }
    }
    report.tolerance = tol;
    report.passed = report.max_error < tol;
    return report;
}

}  // namespace eloc

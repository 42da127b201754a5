#pragma once

#include <memory>
#include <string>
#include <vector>

#include "eloc/common.hpp"

namespace eloc {

// Dense 64-bit tensor with an optional same-shape gradient accumulator.
// Values are stored row-major. Copies are shallow (shared payload); use
// clone() for a deep copy. Gradients of parameters accumulate additively
// across backward passes until zero_grad() is called.
class Tensor {
public:
    struct Payload {
        std::vector<int> shape;
        std::vector<double> values;
        std::vector<double> grad;  // empty until needed
        bool requires_grad = false;
    };

    Tensor() = default;

    explicit Tensor(std::vector<int> shape, bool requires_grad = false);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad = false);

    bool defined() const { return static_cast<bool>(p_); }
    const std::vector<int>& shape() const { return p_->shape; }
    int rank() const { return static_cast<int>(p_->shape.size()); }
    long long size() const { return static_cast<long long>(p_->values.size()); }
    int dim(int i) const { return p_->shape[static_cast<size_t>(i)]; }

    // 2-D helpers; throw on rank mismatch.
    int rows() const;
    int cols() const;

    // Tensor is a shared handle: copies alias the same payload, and payload
    // access is const on the handle (as with shared_ptr).
    double* data() const { return p_->values.data(); }
    std::vector<double>& values() const { return p_->values; }

    double& at(int i) const { return p_->values[static_cast<size_t>(i)]; }
    double& at(int i, int j) const { return p_->values[static_cast<size_t>(i) * cols() + j]; }
    double& at3(int a, int b, int c) const;

    bool requires_grad() const { return p_->requires_grad; }
    void set_requires_grad(bool flag) const;

    bool has_grad() const { return !p_->grad.empty(); }
    // Lazily allocated, zero-filled on first access.
    std::vector<double>& grad() const;
    void zero_grad() const;

    // Deep copy of values (and requires_grad flag; gradient starts zeroed).
    Tensor clone() const;

    bool all_finite() const;
    std::string shape_str() const;

    // Identity of the underlying payload (used by the graph).
    std::shared_ptr<Payload> payload() const { return p_; }
    static Tensor wrap(std::shared_ptr<Payload> p);

private:
    std::shared_ptr<Payload> p_;
};

long long shape_product(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace eloc

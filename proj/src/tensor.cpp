#include "eloc/tensor.hpp"

#include <cmath>
#include <sstream>

namespace eloc {

long long shape_product(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape, bool requires_grad) {
    for (int d : shape) {
        if (d <= 0) throw dimension_error("tensor dimension must be positive, got " + shape_to_string(shape));
    }
    p_ = std::make_shared<Payload>();
    p_->shape = std::move(shape);
    p_->values.assign(static_cast<size_t>(shape_product(p_->shape)), 0.0);
    p_->requires_grad = requires_grad;
    if (requires_grad) p_->grad.assign(p_->values.size(), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.p_->values) v = value;
    return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (shape_product(shape) != static_cast<long long>(values.size())) {
        throw dimension_error("value count " + std::to_string(values.size()) +
                              " does not match shape " + shape_to_string(shape));
    }
    Tensor t(std::move(shape), requires_grad);
    t.p_->values = std::move(values);
    return t;
}

int Tensor::rows() const {
    if (rank() != 2) throw dimension_error("rows() on non-matrix tensor " + shape_str());
    return p_->shape[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw dimension_error("cols() on non-matrix tensor " + shape_str());
    return p_->shape[1];
}

double& Tensor::at3(int a, int b, int c) const {
    const int d1 = p_->shape[1], d2 = p_->shape[2];
    return p_->values[(static_cast<size_t>(a) * d1 + b) * d2 + c];
}

void Tensor::set_requires_grad(bool flag) const {
    p_->requires_grad = flag;
    if (flag && p_->grad.empty()) p_->grad.assign(p_->values.size(), 0.0);
    if (!flag) p_->grad.clear();
}

std::vector<double>& Tensor::grad() const {
    if (p_->grad.empty()) p_->grad.assign(p_->values.size(), 0.0);
    return p_->grad;
}

void Tensor::zero_grad() const {
    if (!p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t;
    t.p_ = std::make_shared<Payload>();
    t.p_->shape = p_->shape;
    t.p_->values = p_->values;
    t.p_->requires_grad = p_->requires_grad;
    if (p_->requires_grad) t.p_->grad.assign(p_->values.size(), 0.0);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : p_->values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(p_->shape); }

Tensor Tensor::wrap(std::shared_ptr<Payload> p) {
    Tensor t;
    t.p_ = std::move(p);
    return t;
}

}  // namespace eloc

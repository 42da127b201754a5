#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "eloc/tensor.hpp"

namespace eloc {

// Reverse-mode tape. Each primitive records one step that propagates the
// adjoint of its output into the adjoints of its inputs. backward() replays
// the tape exactly once in reverse; a second call without a fresh forward
// pass is an error. Ops on untracked inputs are computed without recording.
//
// One Graph serves one forward/backward pass. Independent graphs may run
// concurrently; parameters are shared read-only during the pass.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // --- primitives -------------------------------------------------------
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose(const Tensor& a);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double s);
    // out[i][j] = a[i][j] + bias[j]
    Tensor add_bias_rows(const Tensor& a, const Tensor& bias);
    Tensor leaky_relu(const Tensor& a, double slope);
    Tensor sigmoid(const Tensor& a);
    Tensor tanh(const Tensor& a);
    Tensor log_sigmoid(const Tensor& a);
    Tensor softmax(const Tensor& a, int axis);
    Tensor log_softmax(const Tensor& a, int axis);
    Tensor sum(const Tensor& a);  // -> shape {1}
    Tensor slice_rows(const Tensor& a, int r0, int r1);
    Tensor slice_cols(const Tensor& a, int c0, int c1);
    Tensor concat_rows(const std::vector<Tensor>& parts);
    Tensor reshape(const Tensor& a, std::vector<int> shape);

    // --- custom nodes (fused layers etc.) ---------------------------------
    bool tracked(const Tensor& t) const { return t.requires_grad(); }
    void record(const Tensor& out, std::function<void()> step);

    // --- backward ----------------------------------------------------------
    // loss must be scalar (one element). Seeds its adjoint with 1, replays
    // the tape in reverse, accumulating into every tracked leaf's grad.
    void backward(const Tensor& loss);
    bool backward_done() const { return consumed_; }
    size_t recorded_ops() const { return tape_.size(); }

    // Adjoint buffer access for custom nodes.
    static std::vector<double>& adjoint(const Tensor& t);
    static bool has_adjoint(const Tensor& t);

private:
    struct Node {
        std::shared_ptr<Tensor::Payload> out;
        std::function<void()> step;
    };
    std::vector<Node> tape_;
    bool consumed_ = false;
};

}  // namespace eloc

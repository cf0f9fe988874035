#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "infant/nn/tensor.hpp"

namespace infant::nn {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
// already topologically sorted; backward() walks it in reverse. A graph built
// with record=false only evaluates values (used for acting and burn-in).
//
// Every op rejects non-finite outputs with a NumericError naming the op, and
// backward() does the same for gradients.
template <class T>
class Graph {
public:
    explicit Graph(bool record = true) : record_(record) {}

    bool recording() const { return record_; }

    Var input(Tensor<T> value);
    // Borrowed constant; the tensor must outlive the graph.
    Var input_ref(const Tensor<T>& value);
    // Borrowed parameters that receive gradients when recording. Callers that
    // already validated the set (e.g. once per episode) may skip the scan.
    std::vector<Var> bind(const ParamSet<T>& params, bool check_finite = true);

    const Tensor<T>& value(Var v) const;
    // Null when no gradient reached the node.
    const Tensor<T>* grad(Var v) const;
    ParamSet<T> param_grads(const ParamSet<T>& params, std::span<const Var> bound) const;
    std::size_t num_nodes() const { return nodes_.size(); }

    Var matmul(Var a, Var w);            // [R,I] x [I,O]
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_row(Var a, Var bias);        // bias is [1,C], broadcast over rows
    Var scale(Var a, T s);
    Var add_scalar(Var a, T s);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var relu(Var a);
    Var exp(Var a);
    Var square(Var a);
    Var concat_cols(std::span<const Var> parts);
    Var slice_cols(Var a, int start, int len);
    // out = mask ? src : a, with mask a constant 0/1 tensor of a's shape.
    Var where(const Tensor<T>& mask, Var src, Var a);
    // Rescales each (sin, cos) pair starting at the given column offsets to unit length.
    Var normalize_pairs(Var a, std::span<const int> pair_offsets);
    // mask ? (pred - target)^2 : 0, elementwise.
    Var masked_sq_error(Var pred, const Tensor<T>& target, const Tensor<T>& mask);
    Var sum_all(Var a);
    Var mean_all(Var a);
    Var row_sum(Var a);                  // [R,C] -> [R,1]
    Var log_softmax(Var a);
    Var gather(Var a, std::span<const int> cols);  // [R,C] -> [R,1]
    Var clamp(Var a, T lo, T hi);
    Var minimum(Var a, Var b);           // ties pick a
    // Fused gate nonlinearity: z=[i|f|g|o] ([R,4H]), c ([R,H]) -> [h' | c'] ([R,2H]).
    Var lstm_cell(Var gates, Var c);

    void backward(Var loss);

private:
    struct Node {
        Tensor<T> value;
        const Tensor<T>* ref = nullptr;
        Tensor<T> grad;
        bool needs_grad = false;
        const char* op = "";
        std::array<int, 3> in{-1, -1, -1};
        std::function<void(Graph&, int)> back;
    };

    const Tensor<T>& val(int id) const { return nodes_[id].ref ? *nodes_[id].ref : nodes_[id].value; }
    Tensor<T>& grad_ref(int id);
    bool needs(Var v) const { return record_ && nodes_[v.id].needs_grad; }
    Var push(const char* op, Tensor<T> value, std::array<int, 3> in, std::function<void(Graph&, int)> back);
    void check(Var v) const;

    bool record_;
    std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace infant::nn

#pragma once

#include <string>
#include <vector>

#include "infant/nn/graph.hpp"

namespace infant::nn {

enum class Activation { Tanh, Relu, Linear };

struct MlpSpec {
    std::vector<int> widths;  // input, hidden..., output
    Activation hidden = Activation::Tanh;

    void validate() const;
};

struct LstmSpec {
    int input = 0;
    int hidden = 0;
    int layers = 1;

    void validate() const;
};

// Glorot-uniform dense kernel.
template <class T>
Tensor<T> glorot_uniform(int fan_in, int fan_out, Rng& rng);
// [n, n] orthogonal matrix by Gram-Schmidt on a Gaussian draw.
template <class T>
Tensor<T> orthogonal(int n, Rng& rng);

// Dense stack. Parameters live in a shared ParamSet; the module only keeps
// their indices, so a Graph::bind over the whole set serves every module.
template <class T>
class Mlp {
public:
    Mlp() = default;
    Mlp(MlpSpec spec, ParamSet<T>& params, const std::string& prefix, Rng& rng);
    // Re-attaches to parameters that were created (or loaded) under prefix.
    static Mlp attach(MlpSpec spec, const ParamSet<T>& params, const std::string& prefix);

    Var forward(Graph<T>& g, std::span<const Var> bound, Var x) const;
    const MlpSpec& spec() const { return spec_; }

private:
    MlpSpec spec_;
    std::vector<int> w_, b_;
};

template <class T>
struct LstmVars {
    std::vector<Var> h, c;  // one per layer
};

// Stacked LSTM. Gate order in every 4H block is input, forget, cell, output.
template <class T>
class Lstm {
public:
    Lstm() = default;
    Lstm(LstmSpec spec, ParamSet<T>& params, const std::string& prefix, Rng& rng);
    static Lstm attach(LstmSpec spec, const ParamSet<T>& params, const std::string& prefix);

    LstmVars<T> step(Graph<T>& g, std::span<const Var> bound, Var x, const LstmVars<T>& state) const;
    const LstmSpec& spec() const { return spec_; }

private:
    LstmSpec spec_;
    std::vector<int> wx_, wh_, b_;
};

// Row of a one-hot encoding, [rows, n].
template <class T>
Tensor<T> one_hot(std::span<const int> index, int n);

extern template class Mlp<float>;
extern template class Mlp<double>;
extern template class Lstm<float>;
extern template class Lstm<double>;

}  // namespace infant::nn

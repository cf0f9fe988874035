#include "infant/nn/layers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace infant::nn {

void MlpSpec::validate() const {
    if (widths.size() < 2) throw std::invalid_argument("MlpSpec: need at least input and output widths");
    for (int w : widths)
        if (w <= 0) throw std::invalid_argument("MlpSpec: widths must be positive");
}

void LstmSpec::validate() const {
    if (input <= 0 || hidden <= 0 || layers <= 0) throw std::invalid_argument("LstmSpec: sizes must be positive");
}

template <class T>
Tensor<T> glorot_uniform(int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor<T> w(fan_in, fan_out);
    for (auto& x : w.data) x = static_cast<T>(u(rng));
    return w;
}

template <class T>
Tensor<T> orthogonal(int n, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        for (;;) {
            for (auto& x : q[i]) x = nd(rng);
            for (int j = 0; j < i; ++j) {
                double d = 0.0;
                for (int k = 0; k < n; ++k) d += q[i][k] * q[j][k];
                for (int k = 0; k < n; ++k) q[i][k] -= d * q[j][k];
            }
            double len = 0.0;
            for (double x : q[i]) len += x * x;
            len = std::sqrt(len);
            if (len < 1e-8) continue;
            for (auto& x : q[i]) x /= len;
            break;
        }
    }
    Tensor<T> out(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) out(i, k) = static_cast<T>(q[i][k]);
    return out;
}

template <class T>
Mlp<T>::Mlp(MlpSpec spec, ParamSet<T>& params, const std::string& prefix, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
        const int in = spec_.widths[l], out = spec_.widths[l + 1];
        w_.push_back(params.add(prefix + ".w" + std::to_string(l), glorot_uniform<T>(in, out, rng)));
        b_.push_back(params.add(prefix + ".b" + std::to_string(l), Tensor<T>(1, out)));
    }
}

template <class T>
Mlp<T> Mlp<T>::attach(MlpSpec spec, const ParamSet<T>& params, const std::string& prefix) {
    spec.validate();
    Mlp m;
    m.spec_ = std::move(spec);
    for (std::size_t l = 0; l + 1 < m.spec_.widths.size(); ++l) {
        const int wi = params.require(prefix + ".w" + std::to_string(l));
        const int bi = params.require(prefix + ".b" + std::to_string(l));
        if (params[wi].rows != m.spec_.widths[l] || params[wi].cols != m.spec_.widths[l + 1])
            throw std::invalid_argument("Mlp::attach: shape mismatch for " + params.name(wi));
        m.w_.push_back(wi);
        m.b_.push_back(bi);
    }
    return m;
}

template <class T>
Var Mlp<T>::forward(Graph<T>& g, std::span<const Var> bound, Var x) const {
    const std::size_t n = w_.size();
    for (std::size_t l = 0; l < n; ++l) {
        x = g.add_row(g.matmul(x, bound[w_[l]]), bound[b_[l]]);
        if (l + 1 == n) break;
        switch (spec_.hidden) {
            case Activation::Tanh: x = g.tanh(x); break;
            case Activation::Relu: x = g.relu(x); break;
            case Activation::Linear: break;
        }
    }
    return x;
}

template <class T>
Lstm<T>::Lstm(LstmSpec spec, ParamSet<T>& params, const std::string& prefix, Rng& rng) : spec_(spec) {
    spec_.validate();
    const int H = spec_.hidden;
    for (int l = 0; l < spec_.layers; ++l) {
        const int in = l == 0 ? spec_.input : H;
        const std::string p = prefix + ".l" + std::to_string(l);
        wx_.push_back(params.add(p + ".wx", glorot_uniform<T>(in, 4 * H, rng)));
        Tensor<T> wh(H, 4 * H);
        for (int gate = 0; gate < 4; ++gate) {
            const Tensor<T> q = orthogonal<T>(H, rng);
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < H; ++c) wh(r, gate * H + c) = q(r, c);
        }
        wh_.push_back(params.add(p + ".wh", std::move(wh)));
        Tensor<T> b(1, 4 * H);
        for (int k = 0; k < H; ++k) b.data[H + k] = T(1);
        b_.push_back(params.add(p + ".b", std::move(b)));
    }
}

template <class T>
Lstm<T> Lstm<T>::attach(LstmSpec spec, const ParamSet<T>& params, const std::string& prefix) {
    spec.validate();
    Lstm m;
    m.spec_ = spec;
    for (int l = 0; l < spec.layers; ++l) {
        const std::string p = prefix + ".l" + std::to_string(l);
        m.wx_.push_back(params.require(p + ".wx"));
        m.wh_.push_back(params.require(p + ".wh"));
        m.b_.push_back(params.require(p + ".b"));
        const int in = l == 0 ? spec.input : spec.hidden;
        if (params[m.wx_.back()].rows != in || params[m.wx_.back()].cols != 4 * spec.hidden)
            throw std::invalid_argument("Lstm::attach: shape mismatch for " + p);
    }
    return m;
}

template <class T>
LstmVars<T> Lstm<T>::step(Graph<T>& g, std::span<const Var> bound, Var x, const LstmVars<T>& state) const {
    const int H = spec_.hidden;
    LstmVars<T> next;
    Var in = x;
    for (int l = 0; l < spec_.layers; ++l) {
        Var z = g.add(g.matmul(in, bound[wx_[l]]), g.matmul(state.h[l], bound[wh_[l]]));
        z = g.add_row(z, bound[b_[l]]);
        const Var hc = g.lstm_cell(z, state.c[l]);
        next.h.push_back(g.slice_cols(hc, 0, H));
        next.c.push_back(g.slice_cols(hc, H, H));
        in = next.h.back();
    }
    return next;
}

template <class T>
Tensor<T> one_hot(std::span<const int> index, int n) {
    Tensor<T> out(static_cast<int>(index.size()), n);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] < 0 || index[r] >= n) throw std::invalid_argument("one_hot: index out of range");
        out(static_cast<int>(r), index[r]) = T(1);
    }
    return out;
}

template Tensor<float> glorot_uniform<float>(int, int, Rng&);
template Tensor<double> glorot_uniform<double>(int, int, Rng&);
template Tensor<float> orthogonal<float>(int, Rng&);
template Tensor<double> orthogonal<double>(int, Rng&);
template Tensor<float> one_hot<float>(std::span<const int>, int);
template Tensor<double> one_hot<double>(std::span<const int>, int);
template class Mlp<float>;
template class Mlp<double>;
template class Lstm<float>;
template class Lstm<double>;

}  // namespace infant::nn

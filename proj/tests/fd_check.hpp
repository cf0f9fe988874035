#pragma once

// Finite-difference gradient oracle over random small recurrent networks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "infant/nn/graph.hpp"
#include "infant/nn/layers.hpp"

namespace fdcheck {

using infant::Rng;
using infant::nn::Graph;
using infant::nn::ParamSet;
using infant::nn::Tensor;
using infant::nn::Var;

struct RandomNet {
    ParamSet<double> params;
    std::function<Var(Graph<double>&, std::span<const Var>)> loss;
    int steps = 0;
};

// LSTM over >= 5 steps, an MLP readout with a renormalized angle pair, a masked
// squared error and a log-softmax term; every op the training code uses.
inline RandomNet make_random_net(std::uint64_t seed) {
    using namespace infant::nn;
    Rng rng(seed);
    std::uniform_int_distribution<int> small(2, 5), steps_d(5, 7), layers_d(1, 2);
    std::normal_distribution<double> nd(0.0, 1.0);
    const int in = small(rng), hidden = small(rng), out = 2 + small(rng), batch = small(rng) - 1;
    const int steps = steps_d(rng);
    const int layers = layers_d(rng);

    RandomNet net;
    net.steps = steps;
    auto lstm = std::make_shared<Lstm<double>>(LstmSpec{in, hidden, layers}, net.params, "rnn", rng);
    auto head = std::make_shared<Mlp<double>>(MlpSpec{{hidden, small(rng) + 1, out}, Activation::Tanh}, net.params,
                                              "head", rng);
    // Shift init away from the saturated/flat regime so gradients are informative.
    for (int i = 0; i < net.params.size(); ++i)
        for (auto& x : net.params[i].data) x += 0.1 * nd(rng);

    auto xs = std::make_shared<std::vector<Tensor<double>>>();
    auto targets = std::make_shared<std::vector<Tensor<double>>>();
    auto masks = std::make_shared<std::vector<Tensor<double>>>();
    auto classes = std::make_shared<std::vector<int>>();
    std::bernoulli_distribution coin(0.7);
    std::uniform_int_distribution<int> cls(0, out - 1);
    for (int t = 0; t < steps; ++t) {
        Tensor<double> x(batch, in), y(batch, out), m(batch, out);
        for (auto& v : x.data) v = nd(rng);
        for (auto& v : y.data) v = nd(rng);
        for (auto& v : m.data) v = coin(rng) ? 1.0 : 0.0;
        xs->push_back(std::move(x));
        targets->push_back(std::move(y));
        masks->push_back(std::move(m));
    }
    for (int b = 0; b < batch; ++b) classes->push_back(cls(rng));

    // Keeps the renormalized pair away from the origin, where the map's
    // curvature (~1/|v|^2) would swamp a central difference at the pinned step.
    auto pair_offset = std::make_shared<Tensor<double>>(1, out);
    pair_offset->data[1] = 2.0;

    net.loss = [=](Graph<double>& g, std::span<const Var> bound) {
        LstmVars<double> st;
        for (int l = 0; l < layers; ++l) {
            st.h.push_back(g.input(Tensor<double>(batch, hidden)));
            st.c.push_back(g.input(Tensor<double>(batch, hidden)));
        }
        std::vector<Var> terms;
        Var last;
        const int pair[] = {0};
        for (int t = 0; t < steps; ++t) {
            st = lstm->step(g, bound, g.input_ref((*xs)[t]), st);
            Var y = head->forward(g, bound, st.h.back());
            y = g.normalize_pairs(g.add_row(y, g.input_ref(*pair_offset)), pair);
            terms.push_back(g.sum_all(g.masked_sq_error(y, (*targets)[t], (*masks)[t])));
            last = y;
        }
        Var total = terms[0];
        for (std::size_t k = 1; k < terms.size(); ++k) total = g.add(total, terms[k]);
        const Var nll = g.scale(g.sum_all(g.gather(g.log_softmax(last), *classes)), -1.0);
        return g.add(total, nll);
    };
    return net;
}

struct Stats {
    int total = 0;
    int within = 0;  // relative error < 1e-4
    double worst = 0.0;
};

// Relative error with a floor on the denominator: gradients below the floor
// are compared absolutely against it.
inline double relative_error(double a, double n, double floor = 1e-6) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

inline Stats check(RandomNet& net, double h = 1e-3) {
    Graph<double> g(true);
    const auto bound = g.bind(net.params);
    const Var loss = net.loss(g, bound);
    g.backward(loss);
    const ParamSet<double> analytic = g.param_grads(net.params, bound);

    auto eval = [&] {
        Graph<double> e(false);
        const auto b = e.bind(net.params);
        return e.value(net.loss(e, b)).data[0];
    };
    Stats s;
    for (int i = 0; i < net.params.size(); ++i) {
        for (std::size_t k = 0; k < net.params[i].size(); ++k) {
            double& p = net.params[i].data[k];
            const double orig = p;
            p = orig + h;
            const double up = eval();
            p = orig - h;
            const double down = eval();
            p = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double err = relative_error(analytic[i].data[k], numeric);
            ++s.total;
            if (err < 1e-4) ++s.within;
            s.worst = std::max(s.worst, err);
        }
    }
    return s;
}

}  // namespace fdcheck

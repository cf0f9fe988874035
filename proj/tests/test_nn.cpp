#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fd_check.hpp"
#include "infant/binio.hpp"
#include "infant/nn/adam.hpp"
#include "infant/nn/checkpoint.hpp"
#include "infant/nn/graph.hpp"
#include "infant/nn/layers.hpp"

using namespace infant;
using namespace infant::nn;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ParamSet<float> random_params(std::uint64_t seed) {
    Rng rng(seed);
    ParamSet<float> ps;
    Mlp<float>(MlpSpec{{4, 6, 3}}, ps, "m", rng);
    Lstm<float>(LstmSpec{3, 5, 2}, ps, "r", rng);
    return ps;
}

}  // namespace

TEST_CASE("identity linear layer") {
    ParamSet<float> ps;
    ps.add("m.w0", Tensor<float>(3, 3, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1}));
    ps.add("m.b0", Tensor<float>(1, 3));
    const auto mlp = Mlp<float>::attach(MlpSpec{{3, 3}}, ps, "m");
    Graph<float> g(false);
    const auto bound = g.bind(ps);
    const Tensor<float> x(2, 3, std::vector<float>{1.5f, -2.0f, 0.25f, 3.0f, 0.0f, -7.0f});
    CHECK(g.value(mlp.forward(g, bound, g.input(x))) == x);
}

TEST_CASE("lstm with zero parameters stays at zero") {
    ParamSet<float> ps;
    Rng rng(1);
    const Lstm<float> lstm(LstmSpec{3, 4, 2}, ps, "r", rng);
    for (int i = 0; i < ps.size(); ++i) ps[i].fill(0.0f);
    Graph<float> g(false);
    const auto bound = g.bind(ps);
    LstmVars<float> st;
    for (int l = 0; l < 2; ++l) {
        st.h.push_back(g.input(Tensor<float>(1, 4)));
        st.c.push_back(g.input(Tensor<float>(1, 4)));
    }
    st = lstm.step(g, bound, g.input(Tensor<float>(1, 3, 0.7f)), st);
    for (int l = 0; l < 2; ++l) {
        for (float v : g.value(st.h[l]).data) CHECK(v == 0.0f);
        for (float v : g.value(st.c[l]).data) CHECK(v == 0.0f);
    }
}

TEST_CASE("hand-evaluated two-unit cell") {
    // Input 1, hidden 2. Gate columns: [i0 i1 f0 f1 g0 g1 o0 o1].
    const std::vector<double> wx = {0.5, -0.3, 0.2, 0.1, 0.7, -0.6, 0.4, 0.9};
    const std::vector<double> wh = {0.1, 0.0, -0.2, 0.3, 0.5, 0.1, 0.0, -0.4,   // row for h0
                                    0.2, 0.6, 0.1, -0.1, -0.3, 0.2, 0.3, 0.1};  // row for h1
    const std::vector<double> b = {0.0, 0.1, 1.0, 1.0, -0.1, 0.0, 0.2, -0.2};
    const double x = 0.8, h[2] = {0.3, -0.5}, c[2] = {0.25, -0.75};

    ParamSet<double> ps;
    ps.add("r.l0.wx", Tensor<double>(1, 8, wx));
    ps.add("r.l0.wh", Tensor<double>(2, 8, wh));
    ps.add("r.l0.b", Tensor<double>(1, 8, b));
    const auto lstm = Lstm<double>::attach(LstmSpec{1, 2, 1}, ps, "r");
    Graph<double> g(false);
    const auto bound = g.bind(ps);
    LstmVars<double> st{{g.input(Tensor<double>(1, 2, std::vector<double>{h[0], h[1]}))},
                        {g.input(Tensor<double>(1, 2, std::vector<double>{c[0], c[1]}))}};
    st = lstm.step(g, bound, g.input(Tensor<double>(1, 1, x)), st);

    for (int k = 0; k < 2; ++k) {
        auto z = [&](int gate) {
            const int col = gate * 2 + k;
            return wx[col] * x + wh[col] * h[0] + wh[8 + col] * h[1] + b[col];
        };
        const double ig = sig(z(0)), fg = sig(z(1)), cand = std::tanh(z(2)), og = sig(z(3));
        const double c_new = fg * c[k] + ig * cand;
        const double h_new = og * std::tanh(c_new);
        CHECK(g.value(st.c[0]).data[k] == doctest::Approx(c_new).epsilon(1e-12));
        CHECK(g.value(st.h[0]).data[k] == doctest::Approx(h_new).epsilon(1e-12));
    }
}

TEST_CASE("shape mismatches are rejected") {
    Graph<float> g;
    const Var a = g.input(Tensor<float>(2, 3));
    const Var b = g.input(Tensor<float>(2, 4));
    CHECK_THROWS_AS(g.matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(g.add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(g.slice_cols(a, 2, 2), std::invalid_argument);
}

TEST_CASE("non-finite values are rejected with the op name") {
    Graph<float> g;
    const Var a = g.input(Tensor<float>(1, 1, 100.0f));
    try {
        g.exp(a);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("exp") != std::string::npos);
    }
}

TEST_CASE("gradient of a linear form is its input") {
    ParamSet<float> ps;
    ps.add("w", Tensor<float>(3, 1, std::vector<float>{0.3f, -1.0f, 2.0f}));
    ps.add("dead", Tensor<float>(2, 2, 1.0f));
    Graph<float> g;
    const auto bound = g.bind(ps);
    const Tensor<float> x(1, 3, std::vector<float>{4.0f, -5.0f, 6.0f});
    g.backward(g.sum_all(g.matmul(g.input(x), bound[0])));
    const auto grads = g.param_grads(ps, bound);
    CHECK(grads[0].data == std::vector<float>{4.0f, -5.0f, 6.0f});
    for (float v : grads[1].data) CHECK(v == 0.0f);
    CHECK(g.grad(bound[1]) == nullptr);
}

TEST_CASE("finite-difference agreement on random recurrent nets") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        auto net = fdcheck::make_random_net(seed);
        const auto s = fdcheck::check(net);
        CHECK(s.within >= 0.95 * s.total);
        CHECK(s.worst < 1e-2);
    }
}

TEST_CASE("op-level gradients: clamp, minimum, where") {
    Graph<double> g;
    ParamSet<double> ps;
    ps.add("a", Tensor<double>(1, 4, std::vector<double>{-2.0, 0.5, 3.0, 1.0}));
    ps.add("b", Tensor<double>(1, 4, std::vector<double>{0.0, 0.5, 1.0, 2.0}));
    const auto v = g.bind(ps);
    const Var c = g.clamp(v[0], -1.0, 1.5);
    const Var m = g.minimum(v[0], v[1]);
    const Tensor<double> mask(1, 4, std::vector<double>{1, 0, 1, 0});
    const Var w = g.where(mask, v[1], v[0]);
    g.backward(g.sum_all(g.add(g.add(c, m), w)));
    const auto gr = g.param_grads(ps, v);
    // clamp passes only inside [lo, hi]; minimum ties go to a; where routes by mask.
    CHECK(gr[0].data == std::vector<double>{0 + 1 + 0, 1 + 1 + 1, 0 + 0 + 0, 1 + 1 + 1});
    CHECK(gr[1].data == std::vector<double>{0 + 1, 0 + 0, 1 + 1, 0 + 0});
}

TEST_CASE("batch rows are computed independently of batch size") {
    Rng rng(3);
    ParamSet<float> ps;
    const Mlp<float> mlp(MlpSpec{{7, 16, 5}}, ps, "m", rng);
    std::normal_distribution<float> nd;
    Tensor<float> x(9, 7);
    for (auto& v : x.data) v = nd(rng);
    Graph<float> g(false);
    const auto bound = g.bind(ps);
    const Tensor<float> all = g.value(mlp.forward(g, bound, g.input(x)));
    for (int r = 0; r < x.rows; ++r) {
        Tensor<float> one(1, 7, std::vector<float>(x.row(r), x.row(r) + 7));
        Graph<float> g1(false);
        const auto b1 = g1.bind(ps);
        const Tensor<float> y = g1.value(mlp.forward(g1, b1, g1.input(one)));
        for (int c = 0; c < 5; ++c) CHECK(y(0, c) == all(r, c));
    }
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        ParamSet<float> ps = random_params(1);
        const ParamSet<float> before = ps;
        auto st = AdamState<float>::init(ps, {});
        adam_update(st, ps, ps.zeros_like());
        CHECK(ps == before);
    }
    SUBCASE("single unit step") {
        ParamSet<float> ps;
        ps.add("x", Tensor<float>(1, 1, 0.5f));
        ParamSet<float> g;
        g.add("x", Tensor<float>(1, 1, 1.0f));
        auto st = AdamState<float>::init(ps, {});
        adam_update(st, ps, g);
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        const double expected = 0.5 - 1e-3 / (1.0 + 1e-8);
        CHECK(ps[0].data[0] == static_cast<float>(expected));
    }
    SUBCASE("two steps follow a scalar trace") {
        ParamSet<double> ps;
        ps.add("x", Tensor<double>(1, 1, 2.0));
        const double grads[2] = {0.7, -0.3};
        AdamConfig cfg;
        auto st = AdamState<double>::init(ps, cfg);
        double x = 2.0, m = 0.0, v = 0.0;
        for (int t = 1; t <= 2; ++t) {
            ParamSet<double> g;
            g.add("x", Tensor<double>(1, 1, grads[t - 1]));
            adam_update(st, ps, g);
            m = 0.9 * m + 0.1 * grads[t - 1];
            v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
            const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
            x -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
            CHECK(ps[0].data[0] == doctest::Approx(x).epsilon(1e-14));
        }
        CHECK(st.step == 2);
    }
    SUBCASE("non-finite gradient is rejected") {
        ParamSet<float> ps = random_params(2);
        auto st = AdamState<float>::init(ps, {});
        ParamSet<float> g = ps.zeros_like();
        g[0].data[0] = std::nanf("");
        CHECK_THROWS_AS(adam_update(st, ps, g), NumericError);
    }
}

TEST_CASE("checkpoint round trip and validation") {
    const ParamSet<float> ps = random_params(4);
    std::stringstream ss;
    write_params(ss, ps);
    const std::string bytes = ss.str();
    {
        std::stringstream in(bytes);
        CHECK(read_params(in, ps.spec_hash()) == ps);
    }
    {
        std::stringstream in(bytes);
        CHECK_THROWS_AS(read_params(in, ps.spec_hash() + 1), FormatError);
    }
    {
        std::stringstream in(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_AS(read_params(in), FormatError);
    }
    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::stringstream in(bad);
        CHECK_THROWS_AS(read_params(in), FormatError);
    }
    const auto path = std::filesystem::temp_directory_path() / "infant_ckpt_test.bin";
    save_checkpoint(path, ps);
    CHECK(load_checkpoint(path) == ps);
    std::filesystem::remove(path);
}

TEST_CASE("forward and backward are bit-stable") {
    auto run = [] {
        auto net = fdcheck::make_random_net(77);
        Graph<double> g;
        const auto b = g.bind(net.params);
        g.backward(net.loss(g, b));
        return g.param_grads(net.params, b);
    };
    CHECK(run() == run());
}

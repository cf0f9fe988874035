#include <cmath>
#include <random>

#include "doctest.h"
#include "infant/env.hpp"
#include "infant/world_model.hpp"

using namespace infant;
using nn::ParamSet;
using nn::Tensor;

namespace {

WorldModelConfig small_config() {
    WorldModelConfig c;
    c.hidden = 16;
    c.layers = 2;
    c.decoder_hidden = {16};
    return c;
}

void zero_decoder(WorldModel& wm) {
    for (int i = 0; i < wm.params().size(); ++i)
        if (wm.params().name(i).rfind("wm.dec", 0) == 0) wm.params()[i].fill(0.0f);
}

Observation random_observation(Rng& rng, std::array<bool, 3> visible) {
    std::normal_distribution<float> nd;
    Observation o;
    for (int k = 0; k < kNumObjects; ++k) {
        if (!visible[k]) continue;
        o.values[k * kObjectSlot] = 1.0f;
        for (int i = 1; i < kObjectSlot; ++i) o.values[k * kObjectSlot + i] = nd(rng);
    }
    for (int i = kProprioObsOffset; i < kObsDim; ++i) o.values[i] = nd(rng);
    return o;
}

struct Logged {
    std::vector<Observation> obs;
    std::vector<Action> actions;
    std::vector<WorldModelState> states;  // pre-assimilation
};

Logged log_episode(const WorldModel& wm, int ticks, std::uint64_t seed) {
    EnvConfig cfg;
    cfg.sim.episode_ticks = ticks;
    Environment env(cfg);
    Observation o = env.reset(seed);
    WorldModelState s = wm.initial_state(env.world());
    Rng rng(seed + 99);
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    Logged log;
    while (!env.done()) {
        log.obs.push_back(o);
        log.states.push_back(s);
        const Action a = static_cast<Action>(pick(rng));
        log.actions.push_back(a);
        s = wm.predict(assimilate(s, o), a);
        o = env.step(a).observation;
    }
    return log;
}

Sequence window(const Logged& log, int start, int length) {
    Sequence q;
    q.initial = log.states[start];
    q.observations.assign(log.obs.begin() + start, log.obs.begin() + start + length);
    q.actions.assign(log.actions.begin() + start, log.actions.begin() + start + length);
    return q;
}

}  // namespace

TEST_CASE("assimilate overwrites visible slots and proprioception only") {
    Rng rng(1);
    WorldModelState s;
    for (auto& x : s.b) x = 100.0f;
    s.h = {1.0f, 2.0f};
    s.c = {3.0f, 4.0f};

    SUBCASE("all visible") {
        const Observation o = random_observation(rng, {true, true, true});
        const WorldModelState a = assimilate(s, o);
        CHECK(a.b == o.belief_values());
        CHECK(a.h == s.h);
        CHECK(a.c == s.c);
    }
    SUBCASE("none visible") {
        const Observation o = random_observation(rng, {false, false, false});
        const WorldModelState a = assimilate(s, o);
        for (int j = 0; j < kProprioBeliefOffset; ++j) CHECK(a.b[j] == 100.0f);
    }
    SUBCASE("pink visible, green hidden") {
        const Observation o = random_observation(rng, {true, false, false});
        const WorldModelState a = assimilate(s, o);
        for (int i = 0; i < kObjectPayload; ++i) {
            CHECK(a.b[i] == o.values[1 + i]);                    // pink slot copied
            CHECK(a.b[kObjectPayload + i] == 100.0f);            // green retained
            CHECK(a.b[2 * kObjectPayload + i] == 100.0f);        // caregiver retained
        }
        for (int i = 0; i < kProprioDims; ++i) CHECK(a.b[kProprioBeliefOffset + i] == o.values[kProprioObsOffset + i]);
    }
}

TEST_CASE("readout is the belief in observation order") {
    Rng rng(2);
    const Observation o = random_observation(rng, {true, true, true});
    const WorldModelState s = assimilate(WorldModelState{}, o);
    const Belief& r = readout(s);
    for (int i = 0; i < kObsDim; ++i) {
        const int j = belief_index_of_obs(i);
        if (j >= 0) CHECK(r[j] == o.values[i]);
    }
}

TEST_CASE("zero decoder leaves b unchanged up to pair renormalization") {
    Rng rng(3);
    WorldModel wm(small_config(), rng);
    zero_decoder(wm);
    WorldModelState s = wm.zero_recurrent({});
    std::normal_distribution<float> nd;
    for (auto& x : s.b) x = nd(rng);
    const WorldModelState n = wm.predict(s, Action::Forward);
    Belief expect = s.b;
    for (int off : belief_angle_pairs()) {
        const float len = std::sqrt(expect[off] * expect[off] + expect[off + 1] * expect[off + 1]);
        expect[off] /= len;
        expect[off + 1] /= len;
    }
    CHECK(n.b == expect);
    CHECK(wm.predict(s, Action::Forward) == n);
}

TEST_CASE("hand-traced predict on a two-unit model") {
    WorldModelConfig cfg;
    cfg.hidden = 2;
    cfg.layers = 1;
    cfg.decoder_hidden = {};
    const int in = kBeliefDim + kNumActions;
    auto val = [](int i, int j, int m) { return 0.02f * static_cast<float>((i * 7 + j * 3) % m - m / 2); };
    ParamSet<float> ps;
    Tensor<float> wx(in, 8), wh(2, 8), b(1, 8), dw(2, kBeliefDim), db(1, kBeliefDim);
    for (int i = 0; i < in; ++i)
        for (int j = 0; j < 8; ++j) wx(i, j) = val(i, j, 11);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 8; ++j) wh(i, j) = val(i + 3, j, 7);
    for (int j = 0; j < 8; ++j) b(0, j) = val(j, 1, 5);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < kBeliefDim; ++j) dw(i, j) = val(i, j, 13);
    for (int j = 0; j < kBeliefDim; ++j) db(0, j) = val(j, 2, 9);
    ps.add("wm.rnn.l0.wx", wx);
    ps.add("wm.rnn.l0.wh", wh);
    ps.add("wm.rnn.l0.b", b);
    ps.add("wm.dec.w0", dw);
    ps.add("wm.dec.b0", db);
    const WorldModel wm(cfg, ps);

    WorldModelState s;
    s.h = {0.3f, -0.2f};
    s.c = {0.5f, -0.4f};
    for (int j = 0; j < kBeliefDim; ++j) s.b[j] = 0.1f * static_cast<float>(j % 5) - 0.2f;
    for (int off : belief_angle_pairs()) {
        s.b[off] = 0.6f;
        s.b[off + 1] = 0.8f;
    }
    const Action a = Action::LElbowCW;
    const WorldModelState n = wm.predict(s, a);

    // Scalar trace in double.
    std::vector<double> x(in, 0.0);
    for (int j = 0; j < kBeliefDim; ++j) x[j] = s.b[j];
    x[kBeliefDim + to_int(a)] = 1.0;
    double z[8];
    for (int j = 0; j < 8; ++j) {
        z[j] = b(0, j);
        for (int i = 0; i < in; ++i) z[j] += x[i] * wx(i, j);
        for (int i = 0; i < 2; ++i) z[j] += s.h[i] * wh(i, j);
    }
    auto sg = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    double h[2], c[2];
    for (int k = 0; k < 2; ++k) {
        c[k] = sg(z[2 + k]) * s.c[k] + sg(z[k]) * std::tanh(z[4 + k]);
        h[k] = sg(z[6 + k]) * std::tanh(c[k]);
        CHECK(n.h[k] == doctest::Approx(h[k]).epsilon(1e-5));
        CHECK(n.c[k] == doctest::Approx(c[k]).epsilon(1e-5));
    }
    std::vector<double> bn(kBeliefDim);
    for (int j = 0; j < kBeliefDim; ++j) bn[j] = s.b[j] + db(0, j) + h[0] * dw(0, j) + h[1] * dw(1, j);
    for (int off : belief_angle_pairs()) {
        const double len = std::hypot(bn[off], bn[off + 1]);
        bn[off] /= len;
        bn[off + 1] /= len;
    }
    for (int j = 0; j < kBeliefDim; ++j) CHECK(n.b[j] == doctest::Approx(bn[j]).epsilon(1e-5));
}

TEST_CASE("wm_loss") {
    Rng rng(4);
    SUBCASE("perfect prediction") {
        std::vector<Observation> o{random_observation(rng, {true, false, true}), random_observation(rng, {true, true, true})};
        std::vector<Belief> p{o[0].belief_values(), o[1].belief_values()};
        CHECK(wm_loss(p, o).total == 0.0);
    }
    SUBCASE("invisible objects do not count") {
        std::vector<Observation> o{random_observation(rng, {false, false, false})};
        Belief p = o[0].belief_values();
        for (int j = 0; j < kProprioBeliefOffset; ++j) p[j] = 1e3f;
        CHECK(wm_loss(std::vector<Belief>{p}, o).total == 0.0);
    }
    SUBCASE("two-step handmade sequence") {
        std::vector<Observation> o{random_observation(rng, {false, true, false}),
                                   random_observation(rng, {false, true, false})};
        std::vector<Belief> p{o[0].belief_values(), o[1].belief_values()};
        for (auto& q : p) {
            q[kObjectPayload + 0] += 1.0f;  // green x
            q[kObjectPayload + 5] -= 1.0f;  // green vel.x
            q[kProprioBeliefOffset] += 1.0f;  // infant x
            q[0] += 7.0f;                   // pink is hidden
        }
        double oracle = 0.0;
        for (int t = 0; t < 2; ++t) {
            const Belief v = o[t].belief_values();
            const Belief m = o[t].belief_mask();
            for (int j = 0; j < kBeliefDim; ++j)
                if (m[j] != 0.0f) oracle += double(p[t][j] - v[j]) * double(p[t][j] - v[j]);
        }
        const LossTrace l = wm_loss(p, o);
        CHECK(oracle == doctest::Approx(6.0).epsilon(1e-6));
        CHECK(l.total == doctest::Approx(oracle).epsilon(1e-12));
        CHECK(l.steps() == 2);
        CHECK(masked_step_loss(p[0], o[0]) == doctest::Approx(3.0).epsilon(1e-6));
    }
}

TEST_CASE("stored-state fidelity and batched burn-in") {
    Rng rng(5);
    const WorldModel wm(small_config(), rng);
    const Logged log = log_episode(wm, 80, 17);
    WorldModelState s = log.states[0];
    for (std::size_t t = 0; t < log.obs.size(); ++t) {
        CHECK(s == log.states[t]);
        s = wm.predict(assimilate(s, log.obs[t]), log.actions[t]);
    }
    // A batch of windows reproduces each window's logged stream.
    std::vector<WorldModelState> batch;
    std::vector<int> starts{0, 13, 40};
    for (int st : starts) batch.push_back(log.states[st]);
    std::vector<Action> a(starts.size());
    for (int k = 0; k < 20; ++k) {
        for (std::size_t r = 0; r < starts.size(); ++r) {
            CHECK(batch[r] == log.states[starts[r] + k]);
            batch[r] = assimilate(batch[r], log.obs[starts[r] + k]);
            a[r] = log.actions[starts[r] + k];
        }
        batch = wm.predict(batch, a);
    }
}

TEST_CASE("belief persistence with a zero decoder") {
    Rng rng(6);
    WorldModel wm(small_config(), rng);
    zero_decoder(wm);
    const Logged log = log_episode(wm, 200, 3);
    for (std::size_t t = 1; t < log.obs.size(); ++t) {
        for (int k = 0; k < kNumObjects; ++k) {
            if (log.obs[t - 1].visible(static_cast<TrackedObject>(k))) continue;
            for (int i = 0; i < kObjectPayload; ++i) {
                const int j = k * kObjectPayload + i;
                CHECK(log.states[t].b[j] == log.states[t - 1].b[j]);
            }
        }
    }
}

TEST_CASE("train_batch") {
    Rng rng(7);
    WmTrainConfig tc;
    tc.batch_size = 4;

    SUBCASE("masked-out batch with exact proprioception leaves parameters unchanged") {
        WorldModel wm(small_config(), rng);
        zero_decoder(wm);
        Sequence q;
        Observation o = random_observation(rng, {false, false, false});
        for (int off : {26, 28, 30, 32, 34}) {
            const int i = obs_index_of_belief(off);
            o.values[i] = 0.0f;
            o.values[i + 1] = 1.0f;
        }
        q.initial = assimilate(wm.zero_recurrent({}), o);
        q.observations.assign(tc.sequence_length, o);
        q.actions.assign(tc.sequence_length, Action::NoOp);
        const std::vector<Sequence> batch(tc.batch_size, q);
        const ParamSet<float> before = wm.params();
        auto opt = nn::AdamState<float>::init(wm.params(), tc.adam);
        const TrainStep r = train_batch(wm, opt, batch, tc);
        CHECK(r.applied);
        CHECK(r.loss == 0.0);
        CHECK(wm.params() == before);
    }

    SUBCASE("reported loss equals the rollout loss of the same windows") {
        WorldModel wm(small_config(), rng);
        const Logged log = log_episode(wm, 120, 9);
        std::vector<Sequence> batch;
        for (int st : {0, 30, 55, 90}) batch.push_back(window(log, st, tc.sequence_length));
        double manual = 0.0;
        for (const auto& q : batch) manual += rollout_loss(wm, q, tc.burn_in).total;
        manual /= batch.size();
        auto opt = nn::AdamState<float>::init(wm.params(), tc.adam);
        const TrainStep r = train_batch(wm, opt, batch, tc);
        CHECK(r.loss == doctest::Approx(manual).epsilon(1e-5));
        CHECK(r.applied);
    }

    SUBCASE("burn-in is outside the graph") {
        // A window re-based on its post-burn-in state has the same gradient.
        WorldModel wm(small_config(), rng);
        const Logged log = log_episode(wm, 60, 11);
        const Sequence full = window(log, 5, tc.sequence_length);
        WorldModelState start = full.initial;
        for (int k = 0; k < tc.burn_in - 1; ++k) start = wm.predict(assimilate(start, full.observations[k]), full.actions[k]);
        start = assimilate(start, full.observations[tc.burn_in - 1]);
        Sequence rebased;
        rebased.initial = start;
        rebased.observations.assign(full.observations.begin() + tc.burn_in - 1, full.observations.end());
        rebased.actions.assign(full.actions.begin() + tc.burn_in - 1, full.actions.end());
        const auto g1 = batch_gradient(wm, std::span<const Sequence>(&full, 1), tc.burn_in);
        const auto g2 = batch_gradient(wm, std::span<const Sequence>(&rebased, 1), 0);
        CHECK(g1.loss == g2.loss);
        CHECK(g1.grads == g2.grads);
    }

    SUBCASE("non-finite loss keeps old parameters") {
        WorldModel wm(small_config(), rng);
        const Logged log = log_episode(wm, 40, 2);
        Sequence q = window(log, 0, tc.sequence_length);
        q.observations.back().values[kProprioObsOffset] = 1e30f;
        const ParamSet<float> before = wm.params();
        auto opt = nn::AdamState<float>::init(wm.params(), tc.adam);
        const TrainStep r = train_batch(wm, opt, std::span<const Sequence>(&q, 1), tc);
        CHECK(!r.applied);
        CHECK(wm.params() == before);
        CHECK(opt.step == 0);
    }
}

TEST_CASE("property: invisible target dims affect neither loss nor gradient") {
    Rng rng(8);
    const WorldModel wm(small_config(), rng);
    const Logged log = log_episode(wm, 100, 21);
    std::normal_distribution<float> nd(0.0f, 10.0f);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Sequence> batch{window(log, 3 * trial, 30), window(log, 40 + trial, 30)};
        const auto ref = batch_gradient(wm, batch, 10);
        for (auto& q : batch)
            for (auto& o : q.observations)
                for (int k = 0; k < kNumObjects; ++k)
                    if (!o.visible(static_cast<TrackedObject>(k)))
                        for (int i = 1; i < kObjectSlot; ++i) o.values[k * kObjectSlot + i] = nd(rng);
        const auto pert = batch_gradient(wm, batch, 10);
        CHECK(pert.loss == ref.loss);
        CHECK(pert.grads == ref.grads);
    }
}

TEST_CASE("open-loop error grows with the horizon") {
    Rng rng(10);
    WorldModel wm(small_config(), rng);
    WmTrainConfig tc;
    tc.adam.lr = 3e-3;
    const Logged log = log_episode(wm, 400, 4);
    auto opt = nn::AdamState<float>::init(wm.params(), tc.adam);
    Rng pick(1);
    std::uniform_int_distribution<int> st(0, 400 - tc.sequence_length);
    for (int it = 0; it < 30; ++it) {
        std::vector<Sequence> batch;
        for (int i = 0; i < 8; ++i) batch.push_back(window(log, st(pick), tc.sequence_length));
        train_batch(wm, opt, batch, tc);
    }
    double first = 0.0, mean10 = 0.0;
    int n = 0;
    for (int start = 0; start + 20 <= 400; start += 7, ++n) {
        const LossTrace l = rollout_loss(wm, window(log, start, 20), 10);
        REQUIRE(l.steps() == 10);
        double s0 = 0.0;
        for (int j = 0; j < kBeliefDim; ++j) s0 += l.per_dim[j];
        first += s0;
        mean10 += l.total / 10.0;
    }
    CHECK(mean10 / n >= first / n);
}

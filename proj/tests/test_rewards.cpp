#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "infant/env.hpp"
#include "infant/rewards.hpp"

using namespace infant;
using nn::ParamSet;

namespace {

WorldModelConfig small_wm() {
    WorldModelConfig c;
    c.hidden = 16;
    c.layers = 1;
    c.decoder_hidden = {16};
    return c;
}

EpisodeRecord record(const WorldModel& wm, int ticks, std::uint64_t seed) {
    EnvConfig cfg;
    cfg.sim.episode_ticks = ticks;
    Environment env(cfg);
    Observation o = env.reset(seed);
    WorldModelState s = wm.initial_state(env.world());
    Rng rng(seed + 7);
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    EpisodeRecord ep;
    ep.seed = seed;
    while (!env.done()) {
        const Action a = static_cast<Action>(pick(rng));
        ep.observations.push_back(o);
        ep.states.push_back(s);
        ep.actions.push_back(a);
        s = wm.predict(assimilate(s, o), a);
        o = env.step(a).observation;
    }
    ep.validate();
    return ep;
}

EnsembleConfig small_ensemble(int members) {
    EnsembleConfig c;
    c.members = members;
    c.hidden = {16};
    c.batch_size = 32;
    return c;
}

RndConfig small_rnd() {
    RndConfig c;
    c.embedding = 8;
    c.hidden = {32};
    c.adam.lr = 1e-3;
    return c;
}

}  // namespace

TEST_CASE("reward names round-trip") {
    for (int i = 0; i < kNumRewardKinds; ++i) {
        const auto k = static_cast<RewardKind>(i);
        CHECK(reward_from_name(reward_name(k)) == k);
    }
    CHECK_FALSE(reward_from_name("curiosity").has_value());
    CHECK_FALSE(reward_scores_observation(RewardKind::Disagreement));
    CHECK(reward_scores_observation(RewardKind::Adversarial));
}

TEST_CASE("adversarial reward is the replayed one-step loss and zero for a perfect model") {
    Rng rng(3);
    const WorldModel wm(small_wm(), rng);
    EpisodeRecord ep = record(wm, 40, 11);
    const auto r = reward_adversarial(ep, wm);
    REQUIRE(r.size() == 40);
    CHECK(r[0] == 0.0f);
    for (int t = 1; t < 40; ++t) {
        const WorldModelState pred = wm.predict(assimilate(ep.states[t - 1], ep.observations[t - 1]), ep.actions[t - 1]);
        CHECK(r[t] == doctest::Approx(masked_step_loss(pred.b, ep.observations[t])).epsilon(1e-5));
        CHECK(r[t] >= 0.0f);
    }

    // Observations replaced by the model's own predictions make every loss zero.
    WorldModelState s = ep.states[0];
    for (int t = 0; t < ep.length(); ++t) {
        Observation& o = ep.observations[t];
        const Belief m = o.belief_mask();
        for (int j = 0; j < kBeliefDim; ++j)
            if (m[j] > 0.0f) o.values[obs_index_of_belief(j)] = s.b[j];
        s = wm.predict(assimilate(s, o), ep.actions[t]);
    }
    for (float x : reward_adversarial(ep, wm)) CHECK(x == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("disagreement is zero for identical members and matches a two-member oracle") {
    Rng rng(5);
    const WorldModel wm(small_wm(), rng);
    const EpisodeRecord ep = record(wm, 30, 2);
    Ensemble ens(small_ensemble(3), 16, rng);
    for (int k = 1; k < ens.size(); ++k) ens.member(k) = ens.member(0);
    for (float x : reward_disagreement(ep, ens)) CHECK(x == 0.0f);

    Ensemble two(small_ensemble(2), 16, rng);
    const auto r = reward_disagreement(ep, two);
    std::vector<TickRef> ticks;
    for (int t = 0; t < ep.length(); ++t) ticks.push_back({&ep, t});
    const auto x = transition_inputs(ticks, 16);
    const auto p0 = two.predict(0, x), p1 = two.predict(1, x);
    for (int t = 0; t < ep.length(); ++t) {
        double acc = 0.0;
        for (int j = 0; j < kBeliefDim; ++j) acc += 0.25 * double(p0(t, j) - p1(t, j)) * double(p0(t, j) - p1(t, j));
        CHECK(r[t] == doctest::Approx(acc / kBeliefDim).epsilon(1e-4));
        CHECK(r[t] >= 0.0f);
    }
}

TEST_CASE("disagreement is invariant to duplicating the whole ensemble") {
    Rng rng(6);
    const WorldModel wm(small_wm(), rng);
    const EpisodeRecord ep = record(wm, 20, 4);
    Ensemble a(small_ensemble(3), 16, rng);
    Ensemble b(small_ensemble(6), 16, rng);
    for (int k = 0; k < 6; ++k) b.member(k) = a.member(k % 3);
    const auto ra = reward_disagreement(ep, a), rb = reward_disagreement(ep, b);
    for (int t = 0; t < ep.length(); ++t) CHECK(rb[t] == doctest::Approx(ra[t]).epsilon(1e-4));
}

TEST_CASE("ensemble training lowers a member's loss on a fixed batch") {
    Rng rng(8);
    const WorldModel wm(small_wm(), rng);
    const EpisodeRecord ep = record(wm, 60, 9);
    EnsembleConfig cfg = small_ensemble(2);
    Ensemble ens(cfg, 16, rng);
    std::vector<TickRef> batch;
    for (int t = 0; t + 1 < ep.length(); ++t) batch.push_back({&ep, t});
    const ParamSet<float> other = ens.member(1);
    const double first = ens.train(0, batch);
    double last = first;
    for (int i = 0; i < 60; ++i) last = ens.train(0, batch);
    CHECK(last < first);
    for (int i = 0; i < other.size(); ++i) CHECK(ens.member(1)[i].data == other[i].data);
    const std::vector<TickRef> bad{{&ep, ep.length() - 1}};
    CHECK_THROWS_AS(ens.train(0, bad), std::invalid_argument);
}

TEST_CASE("running norm whitens and clips") {
    RunningNorm n(2);
    const std::vector<std::array<float, 2>> xs{{1, 10}, {3, 10}, {5, 10}};
    for (const auto& x : xs) n.update(x);
    CHECK(n.count() == 3);
    const std::array<float, 2> probe{3 + std::sqrt(8.0f / 3.0f), 10};
    const auto z = n.normalize(probe, 5.0);
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(z[1] == 0.0f);  // zero variance falls back to unit scale
    const std::array<float, 2> far{1000, 10};
    CHECK(n.normalize(far, 5.0)[0] == 5.0f);
    CHECK_THROWS_AS(n.update(std::array<float, 3>{}), std::invalid_argument);
}

TEST_CASE("rnd: zero error when predictor equals target, training reduces error, target frozen") {
    Rng rng(10);
    const WorldModel wm(small_wm(), rng);
    const EpisodeRecord ep = record(wm, 64, 12);
    Rnd rnd(small_rnd(), rng);
    for (const auto& o : ep.observations) rnd.norm().update(o.values);

    Rnd same = rnd;
    same.copy_target_into_predictor();
    for (float e : reward_rnd(ep, same)) CHECK(e == 0.0f);

    const ParamSet<float> target = rnd.target();
    auto mean = [](const std::vector<float>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const double before = mean(rnd.error(ep.observations));
    int decreases = 0;
    double prev = rnd.train(ep.observations);
    for (int i = 0; i < 200; ++i) {
        const double l = rnd.train(ep.observations);
        decreases += l < prev ? 1 : 0;
        prev = l;
    }
    const double after = mean(rnd.error(ep.observations));
    CHECK(after < 0.1 * before);
    CHECK(decreases >= 180);
    for (int i = 0; i < target.size(); ++i) CHECK(rnd.target()[i].data == target[i].data);
}

TEST_CASE("progress: identical anchor gives zero and the reward is the loss difference") {
    Rng rng(13);
    WorldModel wm(small_wm(), rng);
    const EpisodeRecord ep = record(wm, 30, 1);
    ProgressSnapshot snap(ProgressMode::Gamma, ProgressConfig{}, wm.params());
    for (float x : reward_progress(ep, wm, snap)) CHECK(x == 0.0f);

    const WorldModel old(wm.config(), wm.params());
    for (int i = 0; i < wm.params().size(); ++i)
        for (float& v : wm.params()[i].data) v *= 0.9f;
    const auto r = reward_progress(ep, wm, snap);
    const auto lo = one_step_losses(old, ep), lc = one_step_losses(wm, ep);
    for (int t = 0; t < ep.length(); ++t) CHECK(r[t] == doctest::Approx(lo[t] - lc[t]).epsilon(1e-5));
}

TEST_CASE("gamma progress mixes toward the current weights; gamma 1 never moves") {
    ParamSet<float> init, cur;
    init.add("w", nn::Tensor<float>(1, 2, 0.0f));
    cur.add("w", nn::Tensor<float>(1, 2, 1.0f));
    ProgressSnapshot frozen(ProgressMode::Gamma, ProgressConfig{0, 1.0}, init);
    for (int i = 0; i < 10; ++i) frozen.after_model_update(cur);
    CHECK(frozen.anchor()[0].data == init[0].data);

    ProgressSnapshot mix(ProgressMode::Gamma, ProgressConfig{0, 0.5}, init);
    mix.after_model_update(cur);
    CHECK(mix.anchor()[0].data[0] == 0.5f);
    mix.after_model_update(cur);
    CHECK(mix.anchor()[0].data[0] == 0.75f);
    mix.at_episode_end(100, init);  // no effect in gamma mode
    CHECK(mix.anchor()[0].data[0] == 0.75f);
}

TEST_CASE("delta progress anchors to the newest snapshot at least delta steps old") {
    auto params = [](float v) {
        ParamSet<float> p;
        p.add("w", nn::Tensor<float>(1, 1, v));
        return p;
    };
    ProgressSnapshot snap(ProgressMode::Delta, ProgressConfig{100, 0.999}, params(0));
    snap.after_model_update(params(9));  // no effect in delta mode
    snap.at_episode_end(50, params(1));
    CHECK(snap.anchor()[0].data[0] == 0.0f);
    snap.at_episode_end(100, params(2));
    CHECK(snap.anchor()[0].data[0] == 0.0f);
    snap.at_episode_end(150, params(3));
    CHECK(snap.anchor()[0].data[0] == 1.0f);
    snap.at_episode_end(260, params(4));
    CHECK(snap.anchor()[0].data[0] == 3.0f);
}

TEST_CASE("reward scaler divides by the running std and preserves ordering") {
    RewardScaler s;
    CHECK(s.scale() == 1.0);
    const std::vector<float> one{5.0f};
    s.update(one);
    CHECK(s.scale() == 1.0);
    const std::vector<float> flat{2.0f, 2.0f};
    RewardScaler f;
    f.update(flat);
    CHECK(f.scale() == 1.0);

    Rng rng(17);
    std::normal_distribution<float> nd(3.0f, 2.0f);
    std::vector<float> r(500);
    for (float& x : r) x = nd(rng);
    s = RewardScaler{};
    s.update(r);
    double mean = std::accumulate(r.begin(), r.end(), 0.0) / r.size(), sq = 0.0;
    for (float x : r) sq += (x - mean) * (x - mean);
    CHECK(s.scale() == doctest::Approx(std::sqrt(sq / r.size())).epsilon(1e-9));
    const auto out = s.apply(r);
    std::vector<int> ia(r.size()), ib(r.size());
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::stable_sort(ia.begin(), ia.end(), [&](int a, int b) { return r[a] < r[b]; });
    std::stable_sort(ib.begin(), ib.end(), [&](int a, int b) { return out[a] < out[b]; });
    CHECK(ia == ib);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK((out[i] > 0) == (r[i] > 0));
}

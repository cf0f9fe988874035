#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "infant/binio.hpp"
#include "infant/env.hpp"
#include "infant/metrics.hpp"

using namespace infant;

namespace {

Observation posed(double x, double z, double yaw, std::array<double, 4> joints, int visible_bits) {
    Observation o;
    const int p = kProprioObsOffset;
    o.values[p] = static_cast<float>(x);
    o.values[p + 1] = static_cast<float>(z);
    o.values[p + 2] = static_cast<float>(std::sin(yaw));
    o.values[p + 3] = static_cast<float>(std::cos(yaw));
    for (int j = 0; j < 4; ++j) {
        o.values[p + 4 + 2 * j] = static_cast<float>(std::sin(joints[j]));
        o.values[p + 5 + 2 * j] = static_cast<float>(std::cos(joints[j]));
    }
    for (int k = 0; k < 3; ++k) o.values[k * kObjectSlot] = (visible_bits >> k) & 1 ? 1.0f : 0.0f;
    return o;
}

WorldModelConfig tiny_wm() {
    WorldModelConfig c;
    c.hidden = 8;
    c.layers = 1;
    c.decoder_hidden = {8};
    return c;
}

// Deterministic toy trajectories: the infant only turns, no objects in view.
std::vector<EpisodeRecord> toy_episodes(const WorldModel& wm, int count, int length) {
    std::vector<EpisodeRecord> out;
    for (int e = 0; e < count; ++e) {
        EpisodeRecord ep;
        ep.index = e;
        WorldModelState s;
        s.h.assign(wm.state_width(), 0.0f);
        s.c.assign(wm.state_width(), 0.0f);
        for (int t = 0; t < length; ++t) {
            const double yaw = 0.1 * t + 0.5 * e;
            ep.observations.push_back(posed(0.5 * std::sin(0.05 * t), 0.0, yaw, {0.1, 0.2, -0.1, -0.2}, 0));
            ep.actions.push_back(Action::TurnLeft);
            ep.states.push_back(s);
        }
        out.push_back(std::move(ep));
    }
    return out;
}

}  // namespace

TEST_CASE("normalized entropy closed forms") {
    const std::vector<std::int64_t> one{0, 0, 7, 0};
    CHECK(normalized_entropy(one) == 0.0);
    std::vector<std::int64_t> two(16, 0);
    two[3] = two[11] = 500;
    CHECK(normalized_entropy(two) == doctest::Approx(25.0).epsilon(1e-9));
    Rng rng(1);
    std::uniform_int_distribution<int> pick(0, 15);
    std::vector<int> samples(1000000);
    for (int& s : samples) s = pick(rng);
    CHECK(normalized_entropy(samples, 16) >= 99.9);
    const std::vector<std::int64_t> none(4, 0);
    CHECK_THROWS_AS(normalized_entropy(none), std::invalid_argument);
}

TEST_CASE("normalized entropy is bounded and invariant to relabeling bins") {
    Rng rng(2);
    std::uniform_int_distribution<int> c(0, 50);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::int64_t> counts(2 + trial % 30);
        for (auto& x : counts) x = c(rng);
        counts[0] += 1;
        const double h = normalized_entropy(counts);
        CHECK(h >= 0.0);
        CHECK(h <= 100.0);
        std::shuffle(counts.begin(), counts.end(), rng);
        CHECK(normalized_entropy(counts) == doctest::Approx(h).epsilon(1e-12));
    }
}

TEST_CASE("discretizer bins partition their domains") {
    const Discretizer d;
    CHECK(d.location_bins() == 100);
    CHECK(d.orientation_bins() == 16);
    CHECK(d.joint_bins() == 8);
    CHECK(Discretizer::attention_bins() == 8);
    CHECK(d.location(posed(-5.0, -5.0, 0, {}, 0)) == 0);
    CHECK(d.location(posed(4.99, 4.99, 0, {}, 0)) == 99);
    CHECK(d.location(posed(7.0, -7.0, 0, {}, 0)) == 90);
    CHECK(d.orientation(posed(0, 0, -kPi + 1e-6, {}, 0)) == 0);
    CHECK(d.orientation(posed(0, 0, 0.01, {}, 0)) == 8);
    CHECK(d.joint(posed(0, 0, 0, {-kPi / 2 + 1e-6, 0, 0, kPi / 2 - 1e-6}, 0), 0) == 0);
    CHECK(d.joint(posed(0, 0, 0, {-kPi / 2 + 1e-6, 0, 0, kPi / 2 - 1e-6}, 0), 3) == 7);
    CHECK(Discretizer::attention(posed(0, 0, 0, {}, 5)) == 5);

    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BehaviorHistogram h(d);
    for (int i = 0; i < 5000; ++i) h.add(posed(6 * u(rng), 6 * u(rng), 4 * u(rng), {u(rng), u(rng), u(rng), u(rng)}, i % 8), d);
    auto sum = [](const std::vector<std::int64_t>& v) { return std::accumulate(v.begin(), v.end(), std::int64_t{0}); };
    CHECK(sum(h.location) == 5000);
    CHECK(sum(h.orientation) == 5000);
    CHECK(sum(h.attention) == 5000);
    for (const auto& j : h.joints) CHECK(sum(j) == 5000);
}

TEST_CASE("pose entropy averages the four joints") {
    const Discretizer d;
    BehaviorHistogram h(d);
    h.add(posed(0, 0, 0, {-1.5, 0, 0, 0}, 0), d);
    h.add(posed(0, 0, 0, {1.5, 0, 0, 0}, 0), d);
    // Joint 0 splits over two of 8 bins, the others sit in one.
    CHECK(behavior_entropy(h).pose == doctest::Approx(100.0 * std::log(2.0) / std::log(8.0) / 4.0));
}

TEST_CASE("participation oracles") {
    std::vector<FsmEvent> ev;
    ev.push_back({10, EventKind::BranchActivated, Phase::WaitingForPoint, 1});
    for (int i = 0; i < 3; ++i) ev.push_back({100 + i * 50, EventKind::HideFound, Phase::Hide, 0});
    ev.push_back({400, EventKind::HideResample, Phase::Hide, 0});
    const Participation hide = participation(Branch::Hide, ev);
    int scan = 0;
    for (const auto& e : ev) scan += e.kind == EventKind::HideFound;
    CHECK(hide.value == scan);
    CHECK(hide.value == 3.0);
    CHECK(hide.counted);

    std::vector<FsmEvent> roll{{5, EventKind::Hit, Phase::WaitingForPoint, 0},
                               {50, EventKind::Hit, Phase::Roll, 1},
                               {60, EventKind::Hit, Phase::Roll, 0}};
    CHECK(participation(Branch::Roll, roll).value == 2.0);

    std::vector<FsmEvent> chase{{50, EventKind::Throw, Phase::Chase, 1},
                                {80, EventKind::Throw, Phase::Chase, 0},
                                {90, EventKind::Throw, Phase::Chase, 1},
                                {99, EventKind::Throw, Phase::Chase, 1}};
    CHECK(participation(Branch::Chase, chase).value == 0.75);
    const Participation none = participation(Branch::Chase, std::vector<FsmEvent>{});
    CHECK(none.value == 0.0);
    CHECK_FALSE(none.counted);
    CHECK_FALSE(participation(Branch::Independent, ev).counted);
}

TEST_CASE("activation proportions sum to one and empty chase windows are excluded") {
    const Discretizer d;
    std::vector<EpisodeSummary> w;
    const Branch bs[] = {Branch::Hide, Branch::Roll, Branch::Chase, Branch::Chase, Branch::Independent};
    for (int i = 0; i < 5; ++i) {
        EpisodeSummary s{i, bs[i], true, 1.0, {bs[i], 0.0, false}, BehaviorHistogram(d)};
        s.behavior.add(posed(0, 0, 0, {}, 0), d);
        if (i == 2) s.part = {Branch::Chase, 0.5, true};
        w.push_back(s);
    }
    const MetricsRow row = aggregate(w);
    const auto& p = row.activation.proportion;
    CHECK(p[0] + p[1] + p[2] + p[3] == doctest::Approx(1.0));
    CHECK(p[3] == doctest::Approx(0.4));
    CHECK(row.activation.total() == doctest::Approx(0.8));
    CHECK(row.participation[2] == 0.5);
    CHECK(std::isnan(row.participation[0]));
    CHECK(row.mean_reward == 1.0);

    std::stringstream ss;
    write_metrics_header(ss);
    write_metrics_row(ss, row);
    const auto back = read_metrics_csv(ss);
    REQUIRE(back.size() == 1);
    CHECK(back[0].activation.proportion[3] == doctest::Approx(0.4));
    CHECK(std::isnan(back[0].participation[1]));
    CHECK(back[0].entropy.orientation == row.entropy.orientation);
}

TEST_CASE("scripted pointing at the green ball activates chase") {
    EnvConfig cfg;
    cfg.sim.episode_ticks = 300;
    std::vector<Branch> branches;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Environment env(cfg);
        env.reset(seed, ContingencyFlag{true, 1.0});
        Rng rng(seed);
        while (!env.done())
            env.step(scripted_point_action(env.world(), PointTarget::GreenBall, env.detector(), cfg.sim, rng));
        branches.push_back(env.branch());
    }
    CHECK(activation_stats(branches).proportion[static_cast<int>(Branch::Chase)] == 1.0);
}

TEST_CASE("decomposition partitions the total") {
    std::vector<float> pink(kBeliefDim * 3, 0.0f);
    for (int s = 0; s < 3; ++s)
        for (int j = 0; j < kObjectPayload; ++j) pink[s * kBeliefDim + j] = 1.0f;
    const LossDecomposition a = decompose_loss(pink);
    CHECK(a.group[0] == 0.0);
    CHECK(a.group[1] == 24.0);
    CHECK(a.group[2] == 0.0);
    CHECK(a.group[3] == 0.0);

    std::vector<float> one(kBeliefDim, 0.0f);
    one[0] = one[kObjectPayload] = one[2 * kObjectPayload] = one[kProprioBeliefOffset] = 1.0f;
    for (double g : decompose_loss(one).group) CHECK(g == 1.0);

    Rng rng(4);
    std::uniform_real_distribution<float> u(0.0f, 3.0f);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<float> x(kBeliefDim * (1 + trial % 12));
        double total = 0.0;
        for (float& v : x) total += (v = u(rng));
        CHECK(std::abs(decompose_loss(x).total() - total) <= 1e-5 * total);
    }
    CHECK_THROWS_AS(decompose_loss(std::vector<float>(5)), std::invalid_argument);
}

TEST_CASE("segment reservoir samples windows uniformly") {
    std::vector<EpisodeRecord> eps;
    for (int e = 0; e < 3; ++e) {
        EpisodeRecord ep;
        ep.index = e;
        for (int t = 0; t < 10 + 5 * e; ++t) {
            Observation o;
            o.values[0] = static_cast<float>(e);
            o.values[1] = static_cast<float>(t);
            ep.observations.push_back(o);
            ep.actions.push_back(Action::NoOp);
            ep.states.emplace_back();
        }
        eps.push_back(std::move(ep));
    }
    // 7 + 12 + 17 = 36 windows of length 4; sample 6 of them many times.
    std::map<std::pair<int, int>, int> counts;
    const int reps = 6000;
    for (int r = 0; r < reps; ++r) {
        SegmentReservoir res(6, 4, 1000 + r);
        for (const auto& ep : eps) res.offer(ep);
        CHECK(res.offered() == 36);
        for (const auto& s : res.segments())
            ++counts[{static_cast<int>(s.observations[0].values[0]), static_cast<int>(s.observations[0].values[1])}];
    }
    CHECK(counts.size() == 36);
    const double expected = reps * 6.0 / 36.0;
    double chi2 = 0.0;
    for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 66.6);  // 35 degrees of freedom, 0.999 quantile
}

TEST_CASE("validation sets round-trip and build with 2000 segments") {
    Rng rng(5);
    const WorldModel wm(tiny_wm(), rng);
    const auto eps = toy_episodes(wm, 3, 800);
    Rng srng(6);
    const ValidationSet v = build_validation_set(eps, 10, {"scripted", "none", 6, 1.0}, srng);
    CHECK(v.segments.size() == kValidationSegments);
    CHECK(v.segments[0].observations.size() == 20);
    const auto path = (std::filesystem::temp_directory_path() / "infant_vset_test.bin").string();
    save_validation_set(v, path);
    const ValidationSet w = load_validation_set(path);
    std::filesystem::remove(path);
    CHECK(w.provenance.source == "scripted");
    CHECK(w.segments.size() == v.segments.size());
    CHECK(w.segments[17].observations == v.segments[17].observations);
    CHECK(w.segments[17].initial == v.segments[17].initial);
    CHECK(evaluate_on_set(wm, w) == evaluate_on_set(wm, v));

    std::vector<EpisodeRecord> short_eps(eps.begin(), eps.begin() + 1);
    short_eps[0].observations.resize(15);
    short_eps[0].actions.resize(15);
    short_eps[0].states.resize(15);
    CHECK_THROWS_AS(build_validation_set(short_eps, 10, {}, srng), std::invalid_argument);

    ValidationSet bad = v;
    bad.layout ^= 1;
    CHECK_THROWS_AS(bad.validate(), FormatError);
}

TEST_CASE("round-robin entries match hand-computed rollout means and are order independent") {
    Rng rng(7);
    const WorldModel a(tiny_wm(), rng), b(tiny_wm(), rng);
    const auto eps = toy_episodes(a, 2, 40);
    ValidationSet two;
    two.burn_in = 3;
    two.horizon = 10;
    two.segments = {eps[0].window(0, 13), eps[1].window(5, 13)};
    const double oracle = (rollout_loss(a, two.segments[0], 3, true).total + rollout_loss(a, two.segments[1], 3, true).total) / 2;

    ValidationSet other = two;
    std::swap(other.segments[0], other.segments[1]);
    const NamedSet sets[] = {{"s0", &two, "a"}, {"s1", &other, "b"}};
    const NamedModel models[] = {{"a", &a, "a"}, {"b", &b, "b"}};
    const NamedModel reversed[] = {{"b", &b, "b"}, {"a", &a, "a"}};
    const RoundRobin rr = round_robin(models, sets);
    const RoundRobin rv = round_robin(reversed, sets);
    CHECK(rr.loss.size() == 2);
    CHECK(rr.loss[0].size() == 2);
    CHECK(rr.loss[0][0] == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(rr.loss[0][1] == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(rr.loss[0][0] == rv.loss[1][0]);
    CHECK(rr.loss[1][1] == rv.loss[0][1]);
    CHECK(rr.self[0][0]);
    CHECK_FALSE(rr.self[0][1]);
    CHECK(rr.self[1][1]);
    CHECK(round_robin(models, sets).loss == rr.loss);

    std::stringstream ss;
    write_round_robin_csv(ss, rr);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "model,s0,s1,self_set");

    ValidationSet bad = two;
    bad.layout ^= 1;
    const NamedSet bad_sets[] = {{"x", &bad, ""}};
    CHECK_THROWS_AS(round_robin(models, bad_sets), FormatError);
}

TEST_CASE("masked scored steps with exact proprioception contribute zero") {
    Rng rng(8);
    WorldModel wm(tiny_wm(), rng);
    for (int i = 0; i < wm.params().size(); ++i)
        if (wm.params().name(i).rfind("wm.dec", 0) == 0) wm.params()[i].fill(0.0f);
    // Zero decoder keeps b; constant proprioception and no visible objects.
    EpisodeRecord ep;
    for (int t = 0; t < 20; ++t) {
        ep.observations.push_back(posed(1.0, 2.0, 0.0, {0, 0, 0, 0}, 0));
        ep.actions.push_back(Action::NoOp);
        WorldModelState s;
        s.h.assign(wm.state_width(), 0.0f);
        s.c.assign(wm.state_width(), 0.0f);
        s.b[0] = 42.0f;  // wrong pink-ball belief never counts
        ep.states.push_back(s);
    }
    ValidationSet v;
    v.burn_in = 10;
    v.segments = {ep.window(0, 20), ep.window(0, 20)};
    CHECK(evaluate_on_set(wm, v) == 0.0);
}

#include "infant/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace infant {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void PolicyConfig::validate() const {
    for (int w : hidden)
        if (w < 1) throw std::invalid_argument("policy: hidden widths must be >= 1");
}

void PpoConfig::validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("ppo: clip must be in (0, 1)");
    if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("ppo: gamma and lambda must be in [0, 1]");
    if (epochs < 1 || minibatch < 1) throw std::invalid_argument("ppo: epochs and minibatch must be >= 1");
    if (entropy_coef < 0.0 || value_coef < 0.0) throw std::invalid_argument("ppo: coefficients must be >= 0");
    adam.validate();
}

namespace {

nn::MlpSpec head_spec(int in, const std::vector<int>& hidden, int out) {
    nn::MlpSpec s;
    s.widths.push_back(in);
    s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
    s.widths.push_back(out);
    s.hidden = nn::Activation::Tanh;
    return s;
}

}  // namespace

Policy::Policy(PolicyConfig cfg, int hidden_width, Rng& rng) : cfg_(std::move(cfg)), hidden_width_(hidden_width) {
    cfg_.validate();
    actor_ = nn::Mlp<float>(head_spec(input_width(), cfg_.hidden, kNumActions), params_, "pi.actor", rng);
    critic_ = nn::Mlp<float>(head_spec(input_width(), cfg_.hidden, 1), params_, "pi.critic", rng);
}

Policy::Policy(PolicyConfig cfg, int hidden_width, nn::ParamSet<float> params)
    : cfg_(std::move(cfg)), hidden_width_(hidden_width), params_(std::move(params)) {
    cfg_.validate();
    actor_ = nn::Mlp<float>::attach(head_spec(input_width(), cfg_.hidden, kNumActions), params_, "pi.actor");
    critic_ = nn::Mlp<float>::attach(head_spec(input_width(), cfg_.hidden, 1), params_, "pi.critic");
}

void Policy::features(const WorldModelState& s, float* row) const {
    if (static_cast<int>(s.h.size()) < hidden_width_) throw std::invalid_argument("policy: state narrower than the model");
    std::copy(s.h.end() - hidden_width_, s.h.end(), row);
    std::copy(s.b.begin(), s.b.end(), row + hidden_width_);
}

Tensor<float> Policy::features(std::span<const WorldModelState> s) const {
    Tensor<float> x(static_cast<int>(s.size()), input_width());
    for (int r = 0; r < x.rows; ++r) features(s[r], x.row(r));
    return x;
}

Policy::Heads Policy::forward(Graph<float>& g, std::span<const Var> bound, Var x) const {
    return {actor_.forward(g, bound, x), critic_.forward(g, bound, x)};
}

Policy::Output Policy::evaluate(const WorldModelState& s) const {
    Tensor<float> x(1, input_width());
    features(s, x.row(0));
    Graph<float> g(false);
    const auto bound = g.bind(params_, false);
    const Heads h = forward(g, bound, g.input_ref(x));
    Output out;
    const Tensor<float>& l = g.value(h.logits);
    std::copy(l.data.begin(), l.data.end(), out.logits.begin());
    out.value = g.value(h.value).data[0];
    return out;
}

std::array<double, kNumActions> softmax(std::span<const float> logits) {
    std::array<double, kNumActions> p{};
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (int i = 0; i < kNumActions; ++i) z += (p[i] = std::exp(logits[i] - mx));
    for (double& x : p) x /= z;
    return p;
}

double log_prob(std::span<const float> logits, int action) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (float l : logits) z += std::exp(l - mx);
    return logits[action] - mx - std::log(z);
}

int sample_categorical(std::span<const float> logits, Rng& rng) {
    const auto p = softmax(logits);
    const double u = uniform01(rng);
    double acc = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    for (int i = kNumActions - 1; i >= 0; --i)
        if (p[i] > 0.0) return i;
    return 0;
}

ActionSample sample_action(const Policy& policy, const WorldModelState& s, Rng& rng) {
    const Policy::Output o = policy.evaluate(s);
    ActionSample out;
    const int a = sample_categorical(o.logits, rng);
    out.action = static_cast<Action>(a);
    out.logprob = static_cast<float>(log_prob(o.logits, a));
    out.value = o.value;
    out.logits = o.logits;
    return out;
}

Advantages compute_gae(std::span<const float> rewards, std::span<const float> values, double gamma, double lambda) {
    if (rewards.size() != values.size()) throw std::invalid_argument("compute_gae: lengths differ");
    const std::size_t T = rewards.size();
    Advantages out;
    out.advantages.resize(T);
    out.returns.resize(T);
    double next_adv = 0.0, next_value = 0.0;
    for (std::size_t i = T; i-- > 0;) {
        const double delta = rewards[i] + gamma * next_value - values[i];
        next_adv = delta + gamma * lambda * next_adv;
        next_value = values[i];
        out.advantages[i] = static_cast<float>(next_adv);
        out.returns[i] = static_cast<float>(next_adv + values[i]);
    }
    return out;
}

PpoLoss ppo_loss(const Policy& policy, const Rollout& ro, std::span<const int> rows, const PpoConfig& cfg) {
    const int n = static_cast<int>(rows.size());
    const int w = policy.input_width();
    Tensor<float> x(n, w), old_lp(n, 1), adv(n, 1), ret(n, 1);
    std::vector<int> acts(n);
    for (int r = 0; r < n; ++r) {
        const int i = rows[r];
        std::copy_n(ro.features.row(i), w, x.row(r));
        old_lp(r, 0) = ro.logprobs[i];
        adv(r, 0) = ro.advantages[i];
        ret(r, 0) = ro.returns[i];
        acts[r] = ro.actions[i];
    }
    const Tensor<float> ones(n, 1, 1.0f);
    const float inv_n = 1.0f / static_cast<float>(n);
    const float eps = static_cast<float>(cfg.clip);

    Graph<float> g(true);
    const auto bound = g.bind(policy.params());
    const Policy::Heads h = policy.forward(g, bound, g.input_ref(x));
    const Var lsm = g.log_softmax(h.logits);
    const Var ratio = g.exp(g.sub(g.gather(lsm, acts), g.input_ref(old_lp)));
    const Var a = g.input_ref(adv);
    const Var surr1 = g.mul(ratio, a);
    const Var surr2 = g.mul(g.clamp(ratio, 1.0f - eps, 1.0f + eps), a);
    const Var pol = g.scale(g.sum_all(g.minimum(surr1, surr2)), -inv_n);
    const Var val = g.scale(g.sum_all(g.masked_sq_error(h.value, ret, ones)), inv_n);
    const Var ent = g.scale(g.sum_all(g.mul(g.exp(lsm), lsm)), -inv_n);
    const Var total = g.sub(g.add(pol, g.scale(val, static_cast<float>(cfg.value_coef))),
                            g.scale(ent, static_cast<float>(cfg.entropy_coef)));
    g.backward(total);

    PpoLoss out;
    out.total = g.value(total).data[0];
    out.policy = g.value(pol).data[0];
    out.value = g.value(val).data[0];
    out.entropy = g.value(ent).data[0];
    int clipped = 0;
    for (float r : g.value(ratio).data) clipped += (r < 1.0f - eps || r > 1.0f + eps) ? 1 : 0;
    out.clip_fraction = static_cast<double>(clipped) / n;
    out.grads = g.param_grads(policy.params(), bound);
    return out;
}

PpoStats ppo_update(Policy& policy, nn::AdamState<float>& opt, const Rollout& rollout, const PpoConfig& cfg, Rng& rng) {
    cfg.validate();
    PpoStats stats;
    const int n = rollout.size();
    if (n == 0) return stats;
    Rollout ro = rollout;
    if (cfg.normalize_advantages && n > 1) {
        double mean = 0.0, sq = 0.0;
        for (float a : ro.advantages) mean += a;
        mean /= n;
        for (float a : ro.advantages) sq += (a - mean) * (a - mean);
        const double sd = std::sqrt(sq / n);
        for (float& a : ro.advantages) a = static_cast<float>((a - mean) / (sd + 1e-8));
    }
    const nn::ParamSet<float> saved = policy.params();
    const nn::AdamState<float> saved_opt = opt;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    try {
        for (int e = 0; e < cfg.epochs; ++e) {
            std::shuffle(order.begin(), order.end(), rng);
            for (int start = 0; start < n; start += cfg.minibatch) {
                const int len = std::min(cfg.minibatch, n - start);
                const PpoLoss l = ppo_loss(policy, ro, std::span<const int>(order).subspan(start, len), cfg);
                nn::adam_update(opt, policy.params(), l.grads);
                stats.policy_loss += l.policy;
                stats.value_loss += l.value;
                stats.entropy += l.entropy;
                stats.clip_fraction += l.clip_fraction;
                ++stats.updates;
            }
        }
    } catch (const NumericError&) {
        policy.params() = saved;
        opt = saved_opt;
        return PpoStats{0, 0, 0, 0, 0, true};
    }
    if (stats.updates > 0) {
        stats.policy_loss /= stats.updates;
        stats.value_loss /= stats.updates;
        stats.entropy /= stats.updates;
        stats.clip_fraction /= stats.updates;
    }
    return stats;
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::push(std::shared_ptr<const EpisodeRecord> ep) {
    if (!ep) throw std::invalid_argument("ReplayBuffer: null episode");
    episodes_.push_back(std::move(ep));
    while (static_cast<int>(episodes_.size()) > capacity_) episodes_.pop_front();
}

namespace {

// Uniform over sum_i count(i) slots; returns (episode, offset).
template <class Count>
std::vector<TickRef> sample_slots(const std::deque<std::shared_ptr<const EpisodeRecord>>& eps, int n, Count count,
                                  Rng& rng, const char* what) {
    std::vector<std::int64_t> cum;
    std::int64_t total = 0;
    for (const auto& e : eps) cum.push_back(total += std::max(0, count(*e)));
    if (total == 0) throw std::invalid_argument(std::string("ReplayBuffer: not enough data for ") + what);
    std::uniform_int_distribution<std::int64_t> pick(0, total - 1);
    std::vector<TickRef> out(n);
    for (auto& ref : out) {
        const std::int64_t u = pick(rng);
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const std::size_t i = static_cast<std::size_t>(it - cum.begin());
        const std::int64_t before = i == 0 ? 0 : cum[i - 1];
        ref = {eps[i].get(), static_cast<int>(u - before)};
    }
    return out;
}

}  // namespace

std::vector<TickRef> ReplayBuffer::sample_windows(int n, int length, Rng& rng) const {
    if (length < 1) throw std::invalid_argument("ReplayBuffer: window length must be >= 1");
    return sample_slots(
        episodes_, n, [&](const EpisodeRecord& e) { return e.length() - length + 1; }, rng, "a window");
}

std::vector<Sequence> ReplayBuffer::sample_sequences(int n, int length, Rng& rng) const {
    std::vector<Sequence> out;
    out.reserve(n);
    for (const auto& ref : sample_windows(n, length, rng)) out.push_back(ref.episode->window(ref.t, length));
    return out;
}

std::vector<TickRef> ReplayBuffer::sample_transitions(int n, Rng& rng) const {
    return sample_slots(
        episodes_, n, [](const EpisodeRecord& e) { return e.length() - 1; }, rng, "a transition");
}

}  // namespace infant

#include "infant/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace infant {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::string_view reward_name(RewardKind k) {
    switch (k) {
        case RewardKind::Adversarial: return "adversarial";
        case RewardKind::Disagreement: return "disagreement";
        case RewardKind::Rnd: return "rnd";
        case RewardKind::DeltaProgress: return "delta-progress";
        case RewardKind::GammaProgress: return "gamma-progress";
    }
    return "?";
}

std::optional<RewardKind> reward_from_name(std::string_view name) {
    for (int i = 0; i < kNumRewardKinds; ++i)
        if (reward_name(static_cast<RewardKind>(i)) == name) return static_cast<RewardKind>(i);
    return std::nullopt;
}

bool reward_scores_observation(RewardKind k) { return k != RewardKind::Disagreement; }

std::vector<float> one_step_losses(const WorldModel& wm, const EpisodeRecord& ep) {
    const int T = ep.length();
    std::vector<float> out(T, 0.0f);
    if (T == 0) return out;
    WorldModelState s = ep.states[0];
    for (int t = 0; t + 1 < T; ++t) {
        s = wm.predict(assimilate(s, ep.observations[t]), ep.actions[t]);
        out[t + 1] = static_cast<float>(masked_step_loss(s.b, ep.observations[t + 1]));
    }
    return out;
}

std::vector<float> reward_adversarial(const EpisodeRecord& ep, const WorldModel& wm) { return one_step_losses(wm, ep); }

// ---- ensemble ----

void EnsembleConfig::validate() const {
    if (members < 1) throw std::invalid_argument("ensemble: members must be >= 1");
    if (batch_size < 1 || iterations < 0) throw std::invalid_argument("ensemble: bad batch size or iterations");
    adam.validate();
}

namespace {

nn::MlpSpec mlp_spec(int in, const std::vector<int>& hidden, int out, nn::Activation act) {
    nn::MlpSpec s;
    s.widths.push_back(in);
    s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
    s.widths.push_back(out);
    s.hidden = act;
    return s;
}

}  // namespace

Ensemble::Ensemble(EnsembleConfig cfg, int hidden_width, Rng& rng) : cfg_(std::move(cfg)), hidden_width_(hidden_width) {
    cfg_.validate();
    const auto spec = mlp_spec(input_width(), cfg_.hidden, kBeliefDim, nn::Activation::Tanh);
    members_.resize(cfg_.members);
    for (int k = 0; k < cfg_.members; ++k) {
        nets_.emplace_back(spec, members_[k], "ens", rng);
        opt_.push_back(nn::AdamState<float>::init(members_[k], cfg_.adam));
    }
}

Tensor<float> transition_inputs(std::span<const TickRef> ticks, int hidden_width) {
    const int width = hidden_width + kBeliefDim + kNumActions;
    Tensor<float> x(static_cast<int>(ticks.size()), width);
    for (int r = 0; r < x.rows; ++r) {
        const EpisodeRecord& ep = *ticks[r].episode;
        const int t = ticks[r].t;
        const WorldModelState& s = ep.states[t];
        if (static_cast<int>(s.h.size()) < hidden_width) throw std::invalid_argument("transition_inputs: state too narrow");
        float* row = x.row(r);
        std::copy(s.h.end() - hidden_width, s.h.end(), row);
        const Belief b = assimilate(s, ep.observations[t]).b;
        std::copy(b.begin(), b.end(), row + hidden_width);
        row[hidden_width + kBeliefDim + to_int(ep.actions[t])] = 1.0f;
    }
    return x;
}

Tensor<float> Ensemble::predict(int k, const Tensor<float>& inputs) const {
    Graph<float> g(false);
    const auto bound = g.bind(members_[k]);
    return g.value(nets_[k].forward(g, bound, g.input_ref(inputs)));
}

double Ensemble::train(int k, std::span<const TickRef> batch) {
    if (batch.empty()) return 0.0;
    const int n = static_cast<int>(batch.size());
    const Tensor<float> x = transition_inputs(batch, hidden_width_);
    Tensor<float> target(n, kBeliefDim), mask(n, kBeliefDim);
    for (int r = 0; r < n; ++r) {
        const EpisodeRecord& ep = *batch[r].episode;
        const int t = batch[r].t;
        if (t + 1 >= ep.length()) throw std::invalid_argument("Ensemble::train: tick has no successor");
        const Observation& next = ep.observations[t + 1];
        const Belief v = next.belief_values(), m = next.belief_mask();
        std::copy(v.begin(), v.end(), target.row(r));
        std::copy(m.begin(), m.end(), mask.row(r));
    }
    Graph<float> g(true);
    const auto bound = g.bind(members_[k]);
    const Var pred = nets_[k].forward(g, bound, g.input_ref(x));
    const Var loss = g.scale(g.sum_all(g.masked_sq_error(pred, target, mask)), 1.0f / static_cast<float>(n));
    g.backward(loss);
    nn::adam_update(opt_[k], members_[k], g.param_grads(members_[k], bound));
    return g.value(loss).data[0];
}

std::vector<float> reward_disagreement(const EpisodeRecord& ep, const Ensemble& ens) {
    const int T = ep.length();
    std::vector<TickRef> ticks(T);
    for (int t = 0; t < T; ++t) ticks[t] = {&ep, t};
    const int hidden = ens.input_width() - kBeliefDim - kNumActions;
    const Tensor<float> x = transition_inputs(ticks, hidden);
    std::vector<Tensor<float>> preds;
    for (int k = 0; k < ens.size(); ++k) preds.push_back(ens.predict(k, x));
    const double K = ens.size();
    std::vector<float> r(T, 0.0f);
    for (int t = 0; t < T; ++t) {
        double acc = 0.0;
        for (int j = 0; j < kBeliefDim; ++j) {
            double mean = 0.0;
            for (const auto& p : preds) mean += p(t, j);
            mean /= K;
            double var = 0.0;
            for (const auto& p : preds) var += (p(t, j) - mean) * (p(t, j) - mean);
            acc += var / K;
        }
        r[t] = static_cast<float>(acc / kBeliefDim);
    }
    return r;
}

// ---- RND ----

void RndConfig::validate() const {
    if (embedding < 1) throw std::invalid_argument("rnd: embedding must be >= 1");
    if (batch_size < 1 || iterations < 0) throw std::invalid_argument("rnd: bad batch size or iterations");
    if (!(clip > 0.0)) throw std::invalid_argument("rnd: clip must be > 0");
    adam.validate();
}

void RunningNorm::update(std::span<const float> x) {
    if (static_cast<int>(x.size()) != dims()) throw std::invalid_argument("RunningNorm: width mismatch");
    ++count_;
    for (int i = 0; i < dims(); ++i) {
        const double d = x[i] - mean_[i];
        mean_[i] += d / static_cast<double>(count_);
        m2_[i] += d * (x[i] - mean_[i]);
    }
}

std::vector<float> RunningNorm::normalize(std::span<const float> x, double clip) const {
    if (static_cast<int>(x.size()) != dims()) throw std::invalid_argument("RunningNorm: width mismatch");
    std::vector<float> out(x.size());
    for (int i = 0; i < dims(); ++i) {
        const double var = count_ > 1 ? m2_[i] / static_cast<double>(count_) : 1.0;
        const double sd = std::sqrt(var) > 1e-6 ? std::sqrt(var) : 1.0;
        out[i] = static_cast<float>(std::clamp((x[i] - mean_[i]) / sd, -clip, clip));
    }
    return out;
}

Rnd::Rnd(RndConfig cfg, Rng& rng) : cfg_(std::move(cfg)), norm_(kObsDim) {
    cfg_.validate();
    const auto spec = mlp_spec(kObsDim, cfg_.hidden, cfg_.embedding, nn::Activation::Relu);
    target_net_ = nn::Mlp<float>(spec, target_, "rnd.target", rng);
    predictor_net_ = nn::Mlp<float>(spec, predictor_, "rnd.pred", rng);
    opt_ = nn::AdamState<float>::init(predictor_, cfg_.adam);
}

void Rnd::copy_target_into_predictor() {
    for (int i = 0; i < predictor_.size(); ++i) predictor_[i] = target_[i];
}

Tensor<float> Rnd::inputs(std::span<const Observation> obs) const {
    Tensor<float> x(static_cast<int>(obs.size()), kObsDim);
    for (int r = 0; r < x.rows; ++r) {
        const auto v = norm_.normalize(obs[r].values, cfg_.clip);
        std::copy(v.begin(), v.end(), x.row(r));
    }
    return x;
}

std::vector<float> Rnd::error(std::span<const Observation> obs) const {
    const Tensor<float> x = inputs(obs);
    Graph<float> g(false);
    const auto bt = g.bind(target_);
    const Tensor<float> t = g.value(target_net_.forward(g, bt, g.input_ref(x)));
    Graph<float> h(false);
    const auto bp = h.bind(predictor_);
    const Tensor<float> p = h.value(predictor_net_.forward(h, bp, h.input_ref(x)));
    std::vector<float> out(obs.size());
    for (int r = 0; r < x.rows; ++r) {
        double s = 0.0;
        for (int j = 0; j < t.cols; ++j) s += double(p(r, j) - t(r, j)) * double(p(r, j) - t(r, j));
        out[r] = static_cast<float>(s);
    }
    return out;
}

double Rnd::train(std::span<const Observation> batch) {
    if (batch.empty()) return 0.0;
    const Tensor<float> x = inputs(batch);
    Graph<float> gt(false);
    const auto bt = gt.bind(target_);
    const Tensor<float> target = gt.value(target_net_.forward(gt, bt, gt.input_ref(x)));
    const Tensor<float> ones(target.rows, target.cols, 1.0f);

    Graph<float> g(true);
    const auto bound = g.bind(predictor_);
    const Var pred = predictor_net_.forward(g, bound, g.input_ref(x));
    const Var loss = g.scale(g.sum_all(g.masked_sq_error(pred, target, ones)), 1.0f / static_cast<float>(x.rows));
    g.backward(loss);
    nn::adam_update(opt_, predictor_, g.param_grads(predictor_, bound));
    return g.value(loss).data[0];
}

std::vector<float> reward_rnd(const EpisodeRecord& ep, const Rnd& rnd) { return rnd.error(ep.observations); }

// ---- progress ----

void ProgressConfig::validate() const {
    if (delta_steps < 0) throw std::invalid_argument("progress: delta_steps must be >= 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("progress: gamma must be in [0, 1]");
}

ProgressSnapshot::ProgressSnapshot(ProgressMode mode, ProgressConfig cfg, const nn::ParamSet<float>& initial)
    : mode_(mode), cfg_(cfg), anchor_(initial) {
    cfg_.validate();
    if (mode_ == ProgressMode::Delta) history_.emplace_back(0, initial);
}

void ProgressSnapshot::after_model_update(const nn::ParamSet<float>& current) {
    if (mode_ != ProgressMode::Gamma) return;
    const double g = cfg_.gamma;
    for (int i = 0; i < anchor_.size(); ++i) {
        auto& a = anchor_[i].data;
        const auto& c = current[i].data;
        for (std::size_t k = 0; k < a.size(); ++k) a[k] = static_cast<float>(g * a[k] + (1.0 - g) * c[k]);
    }
}

void ProgressSnapshot::at_episode_end(std::int64_t env_steps, const nn::ParamSet<float>& current) {
    if (mode_ != ProgressMode::Delta) return;
    history_.emplace_back(env_steps, current);
    const std::int64_t cutoff = env_steps - cfg_.delta_steps;
    while (history_.size() >= 2 && history_[1].first <= cutoff) history_.pop_front();
    if (history_.front().first <= cutoff) anchor_ = history_.front().second;
}

std::vector<float> reward_progress(const EpisodeRecord& ep, const WorldModel& current, const ProgressSnapshot& snap) {
    const WorldModel old(current.config(), snap.anchor());
    const auto lo = one_step_losses(old, ep);
    const auto lc = one_step_losses(current, ep);
    std::vector<float> r(lo.size());
    for (std::size_t t = 0; t < r.size(); ++t) r[t] = lo[t] - lc[t];
    return r;
}

// ---- scaling ----

void RewardScaler::update(std::span<const float> r) {
    for (float x : r) {
        ++count_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(count_);
        m2_ += d * (x - mean_);
    }
}

double RewardScaler::scale() const {
    if (count_ < 2) return 1.0;
    const double sd = std::sqrt(m2_ / static_cast<double>(count_));
    return sd > 1e-8 ? sd : 1.0;
}

std::vector<float> RewardScaler::apply(std::span<const float> r) const {
    const double s = scale();
    std::vector<float> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = static_cast<float>(r[i] / s);
    return out;
}

}  // namespace infant

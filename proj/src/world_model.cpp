#include "infant/world_model.hpp"

#include <stdexcept>

namespace infant {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void WorldModelConfig::validate() const {
    if (hidden < 1 || layers < 1) throw std::invalid_argument("world model: hidden and layers must be >= 1");
    for (int w : decoder_hidden)
        if (w < 1) throw std::invalid_argument("world model: decoder widths must be >= 1");
}

void WmTrainConfig::validate() const {
    if (!(burn_in >= 0 && burn_in < sequence_length))
        throw std::invalid_argument("world model training: need 0 <= burn_in < sequence_length");
    if (batch_size < 1 || iterations < 1) throw std::invalid_argument("world model training: N and M must be >= 1");
    adam.validate();
}

WorldModelState assimilate(const WorldModelState& s, const Observation& o) {
    WorldModelState out = s;
    const Belief v = o.belief_values();
    const Belief m = o.belief_mask();
    for (int j = 0; j < kBeliefDim; ++j)
        if (m[j] != 0.0f) out.b[j] = v[j];
    return out;
}

double masked_step_loss(const Belief& pred, const Observation& target, float* per_dim) {
    const Belief v = target.belief_values();
    const Belief m = target.belief_mask();
    double total = 0.0;
    for (int j = 0; j < kBeliefDim; ++j) {
        float e2 = 0.0f;
        if (m[j] != 0.0f) {
            const float e = pred[j] - v[j];
            e2 = e * e;
        }
        if (per_dim) per_dim[j] = e2;
        total += e2;
    }
    return total;
}

LossTrace wm_loss(std::span<const Belief> predicted, std::span<const Observation> actual) {
    if (predicted.size() != actual.size()) throw std::invalid_argument("wm_loss: sequence lengths differ");
    LossTrace out;
    out.per_dim.resize(predicted.size() * kBeliefDim);
    for (std::size_t i = 0; i < predicted.size(); ++i)
        out.total += masked_step_loss(predicted[i], actual[i], out.per_dim.data() + i * kBeliefDim);
    return out;
}

namespace {

nn::MlpSpec decoder_spec(const WorldModelConfig& cfg) {
    nn::MlpSpec s;
    s.widths.push_back(cfg.hidden);
    for (int w : cfg.decoder_hidden) s.widths.push_back(w);
    s.widths.push_back(kBeliefDim);
    s.hidden = nn::Activation::Tanh;
    return s;
}

nn::LstmSpec lstm_spec(const WorldModelConfig& cfg) { return {kBeliefDim + kNumActions, cfg.hidden, cfg.layers}; }

Tensor<float> action_rows(std::span<const Action> a) {
    std::vector<int> idx(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) idx[i] = to_int(a[i]);
    return nn::one_hot<float>(idx, kNumActions);
}

void observation_rows(std::span<const Observation> o, Tensor<float>& values, Tensor<float>& mask) {
    const int n = static_cast<int>(o.size());
    values = Tensor<float>(n, kBeliefDim);
    mask = Tensor<float>(n, kBeliefDim);
    for (int r = 0; r < n; ++r) {
        const Belief v = o[r].belief_values();
        const Belief m = o[r].belief_mask();
        std::copy(v.begin(), v.end(), values.row(r));
        std::copy(m.begin(), m.end(), mask.row(r));
    }
}

}  // namespace

WorldModel::WorldModel(WorldModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    lstm_ = nn::Lstm<float>(lstm_spec(cfg_), params_, "wm.rnn", rng);
    decoder_ = nn::Mlp<float>(decoder_spec(cfg_), params_, "wm.dec", rng);
}

WorldModel::WorldModel(WorldModelConfig cfg, nn::ParamSet<float> params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    lstm_ = nn::Lstm<float>::attach(lstm_spec(cfg_), params_, "wm.rnn");
    decoder_ = nn::Mlp<float>::attach(decoder_spec(cfg_), params_, "wm.dec");
}

WorldModelState WorldModel::zero_recurrent(const Belief& b) const {
    WorldModelState s;
    s.h.assign(state_width(), 0.0f);
    s.c.assign(state_width(), 0.0f);
    s.b = b;
    return s;
}

WorldModelState WorldModel::initial_state(const WorldState& world) const { return zero_recurrent(belief_from_world(world)); }

WorldModel::Vars WorldModel::inputs(Graph<float>& g, std::span<const WorldModelState> rows) const {
    const int n = static_cast<int>(rows.size());
    const int H = cfg_.hidden;
    Vars v;
    for (int l = 0; l < cfg_.layers; ++l) {
        Tensor<float> h(n, H), c(n, H);
        for (int r = 0; r < n; ++r) {
            if (static_cast<int>(rows[r].h.size()) != state_width() || static_cast<int>(rows[r].c.size()) != state_width())
                throw std::invalid_argument("world model: state width does not match the model");
            std::copy_n(rows[r].h.begin() + l * H, H, h.row(r));
            std::copy_n(rows[r].c.begin() + l * H, H, c.row(r));
        }
        v.rnn.h.push_back(g.input(std::move(h)));
        v.rnn.c.push_back(g.input(std::move(c)));
    }
    Tensor<float> b(n, kBeliefDim);
    for (int r = 0; r < n; ++r) std::copy(rows[r].b.begin(), rows[r].b.end(), b.row(r));
    v.b = g.input(std::move(b));
    return v;
}

WorldModel::Vars WorldModel::predict(Graph<float>& g, std::span<const Var> bound, const Vars& s,
                                     std::span<const Action> a) const {
    const Var parts[] = {s.b, g.input(action_rows(a))};
    Vars out;
    out.rnn = lstm_.step(g, bound, g.concat_cols(parts), s.rnn);
    const Var delta = decoder_.forward(g, bound, out.rnn.h.back());
    out.b = g.normalize_pairs(g.add(s.b, delta), belief_angle_pairs());
    return out;
}

std::vector<WorldModelState> WorldModel::extract(const Graph<float>& g, const Vars& v) const {
    const Tensor<float>& b = g.value(v.b);
    const int H = cfg_.hidden;
    std::vector<WorldModelState> out(b.rows);
    for (int r = 0; r < b.rows; ++r) {
        out[r].h.resize(state_width());
        out[r].c.resize(state_width());
        for (int l = 0; l < cfg_.layers; ++l) {
            std::copy_n(g.value(v.rnn.h[l]).row(r), H, out[r].h.begin() + l * H);
            std::copy_n(g.value(v.rnn.c[l]).row(r), H, out[r].c.begin() + l * H);
        }
        std::copy_n(b.row(r), kBeliefDim, out[r].b.begin());
    }
    return out;
}

std::vector<WorldModelState> WorldModel::predict(std::span<const WorldModelState> s, std::span<const Action> a) const {
    if (s.size() != a.size()) throw std::invalid_argument("predict: state and action counts differ");
    Graph<float> g(false);
    const auto bound = g.bind(params_, false);
    return extract(g, predict(g, bound, inputs(g, s), a));
}

WorldModelState WorldModel::predict(const WorldModelState& s, Action a) const {
    return predict(std::span<const WorldModelState>(&s, 1), std::span<const Action>(&a, 1))[0];
}

Var assimilate(Graph<float>& g, Var b, std::span<const Observation> o) {
    Tensor<float> values, mask;
    observation_rows(o, values, mask);
    return g.where(mask, g.input(std::move(values)), b);
}

namespace {

void check_window(const Sequence& s, int length, int burn_in) {
    if (static_cast<int>(s.observations.size()) != length || static_cast<int>(s.actions.size()) != length)
        throw std::invalid_argument("world model: all windows in a batch need the same length");
    if (burn_in < 0 || burn_in >= length) throw std::invalid_argument("world model: need 0 <= burn_in < length");
}

// Runs the gradient-free burn-in and returns the state the scored segment
// starts from: the state after assimilating observation burn_in-1, or the
// stored initial state when there is no burn-in.
std::vector<WorldModelState> burn(const WorldModel& wm, std::span<const Sequence> batch, int burn_in,
                                  bool reset_recurrent) {
    std::vector<WorldModelState> s;
    s.reserve(batch.size());
    for (const auto& q : batch) s.push_back(reset_recurrent ? wm.zero_recurrent(q.initial.b) : q.initial);
    std::vector<Action> a(batch.size());
    for (int k = 0; k < burn_in; ++k) {
        for (std::size_t r = 0; r < batch.size(); ++r) s[r] = assimilate(s[r], batch[r].observations[k]);
        if (k == burn_in - 1) break;
        for (std::size_t r = 0; r < batch.size(); ++r) a[r] = batch[r].actions[k];
        s = wm.predict(s, a);
    }
    return s;
}

// Scored open-loop segment. Returns one masked error node per scored step.
std::vector<Var> scored_errors(const WorldModel& wm, Graph<float>& g, std::span<const Var> bound,
                               std::span<const Sequence> batch, std::span<const WorldModelState> start, int burn_in) {
    const int length = static_cast<int>(batch[0].observations.size());
    const std::size_t n = batch.size();
    WorldModel::Vars s = wm.inputs(g, start);
    std::vector<Var> errs;
    std::vector<Action> a(n);
    std::vector<Observation> o(n);
    for (int k = burn_in; k < length; ++k) {
        if (k > 0) {
            for (std::size_t r = 0; r < n; ++r) a[r] = batch[r].actions[k - 1];
            s = wm.predict(g, bound, s, a);
        }
        for (std::size_t r = 0; r < n; ++r) o[r] = batch[r].observations[k];
        Tensor<float> values, mask;
        observation_rows(o, values, mask);
        errs.push_back(g.masked_sq_error(s.b, values, mask));
    }
    return errs;
}

}  // namespace

std::vector<LossTrace> rollout_losses(const WorldModel& wm, std::span<const Sequence> batch, int burn_in,
                                      bool reset_recurrent) {
    std::vector<LossTrace> out(batch.size());
    if (batch.empty()) return out;
    const int length = static_cast<int>(batch[0].observations.size());
    for (const auto& s : batch) check_window(s, length, burn_in);
    const auto start = burn(wm, batch, burn_in, reset_recurrent);
    Graph<float> g(false);
    const auto bound = g.bind(wm.params(), false);
    const auto errs = scored_errors(wm, g, bound, batch, start, burn_in);
    for (Var e : errs) {
        const Tensor<float>& t = g.value(e);
        for (int r = 0; r < t.rows; ++r) {
            for (int j = 0; j < kBeliefDim; ++j) {
                out[r].per_dim.push_back(t(r, j));
                out[r].total += t(r, j);
            }
        }
    }
    return out;
}

LossTrace rollout_loss(const WorldModel& wm, const Sequence& seq, int burn_in, bool reset_recurrent) {
    return rollout_losses(wm, std::span<const Sequence>(&seq, 1), burn_in, reset_recurrent)[0];
}

BatchGradient batch_gradient(const WorldModel& wm, std::span<const Sequence> batch, int burn_in) {
    if (batch.empty()) throw std::invalid_argument("world model: empty batch");
    const int length = static_cast<int>(batch[0].observations.size());
    for (const auto& s : batch) check_window(s, length, burn_in);
    const auto start = burn(wm, batch, burn_in, false);

    Graph<float> g(true);
    const auto bound = g.bind(wm.params());
    const auto errs = scored_errors(wm, g, bound, batch, start, burn_in);
    Var total = g.sum_all(errs[0]);
    for (std::size_t k = 1; k < errs.size(); ++k) total = g.add(total, g.sum_all(errs[k]));
    const Var loss = g.scale(total, 1.0f / static_cast<float>(batch.size()));
    g.backward(loss);
    return {g.value(loss).data[0], g.param_grads(wm.params(), bound)};
}

TrainStep train_batch(WorldModel& wm, nn::AdamState<float>& opt, std::span<const Sequence> batch,
                      const WmTrainConfig& cfg) {
    TrainStep out;
    try {
        BatchGradient bg = batch_gradient(wm, batch, cfg.burn_in);
        out.loss = bg.loss;
        nn::adam_update(opt, wm.params(), bg.grads);
        out.applied = true;
    } catch (const NumericError&) {
        out.applied = false;
    }
    return out;
}

}  // namespace infant

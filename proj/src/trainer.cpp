#include "infant/trainer.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "infant/binio.hpp"
#include "infant/nn/checkpoint.hpp"
#include "json.hpp"

namespace infant {

namespace fs = std::filesystem;

TrainingError::TrainingError(std::int64_t episode, std::string op, const std::string& what)
    : std::runtime_error("episode " + std::to_string(episode) + ", " + op + ": " + what),
      episode_(episode),
      op_(std::move(op)) {}

namespace artifact {

fs::path wm_checkpoint(const fs::path& run, const std::string& tag) { return run / kCheckpoints / ("wm_" + tag + ".bin"); }

fs::path policy_checkpoint(const fs::path& run, const std::string& tag) {
    return run / kCheckpoints / ("policy_" + tag + ".bin");
}

std::string episode_tag(std::int64_t episodes_done) {
    std::ostringstream ss;
    ss << 'e' << std::setw(6) << std::setfill('0') << episodes_done;
    return ss.str();
}

}  // namespace artifact

std::vector<float> action_rewards(std::span<const float> per_tick, bool scores_observation) {
    std::vector<float> out(per_tick.begin(), per_tick.end());
    if (!scores_observation || out.empty()) return out;
    for (std::size_t t = 0; t + 1 < out.size(); ++t) out[t] = per_tick[t + 1];
    out.back() = 0.0f;
    return out;
}

std::vector<float> pink_visible_reward(const EpisodeRecord& ep) {
    std::vector<float> r(ep.length());
    for (int t = 0; t < ep.length(); ++t) r[t] = ep.observations[t].visible(TrackedObject::PinkBall) ? 1.0f : 0.0f;
    return r;
}

namespace {

bool uses_learning(const RunConfig& c) { return c.policy == PolicyKind::Learned; }
bool uses_intrinsic(const RunConfig& c) { return uses_learning(c) && !c.dense_pink_reward; }

std::optional<PointTarget> scripted_target(PolicyKind k) {
    switch (k) {
        case PolicyKind::PointCaregiver: return PointTarget::Caregiver;
        case PolicyKind::PointPink: return PointTarget::PinkBall;
        case PolicyKind::PointGreen: return PointTarget::GreenBall;
        default: return std::nullopt;
    }
}

std::unique_ptr<std::ofstream> open_csv(const fs::path& path) {
    auto os = std::make_unique<std::ofstream>(path, std::ios::trunc);
    if (!*os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

const char* const kEpisodeColumns =
    "episode,seed,responsive,branch,reward_sum,reward_scale,wm_loss,wm_skipped,"
    "ppo_policy_loss,ppo_value_loss,ppo_entropy,ppo_clip_fraction,ppo_aborted\n";

}  // namespace

Trainer::Trainer(RunConfig cfg, bool write_artifacts)
    : cfg_((cfg.validate(), std::move(cfg))),
      artifacts_(write_artifacts),
      out_(cfg_.out),
      env_rng_(make_stream(cfg_.seed, "env")),
      policy_rng_(make_stream(cfg_.seed, "policy")),
      buffer_rng_(make_stream(cfg_.seed, "buffer")),
      aux_rng_(make_stream(cfg_.seed, "aux")),
      ppo_rng_(make_stream(cfg_.seed, "ppo")),
      env_(cfg_.env),
      buffer_(cfg_.replay_capacity),
      reservoir_(std::max(1, cfg_.validation_segments), cfg_.wm_train.burn_in + kValidationHorizon,
                 make_stream(cfg_.seed, "valset")()),
      discretizer_(DiscretizerConfig{10, 16, 8, cfg_.env.sim.room_half_extent, cfg_.env.sim.joint_limit}) {
    Rng wm_init = make_stream(cfg_.seed, "init.wm");
    wm_ = std::make_unique<WorldModel>(cfg_.world_model, wm_init);
    wm_opt_ = nn::AdamState<float>::init(wm_->params(), cfg_.wm_train.adam);
    Rng pi_init = make_stream(cfg_.seed, "init.policy");
    policy_ = std::make_unique<Policy>(cfg_.policy_net, cfg_.world_model.hidden, pi_init);
    pi_opt_ = nn::AdamState<float>::init(policy_->params(), cfg_.ppo.adam);
    if (uses_intrinsic(cfg_)) {
        switch (cfg_.reward) {
            case RewardKind::Disagreement: {
                Rng r = make_stream(cfg_.seed, "init.ensemble");
                ensemble_ = std::make_unique<Ensemble>(cfg_.ensemble, cfg_.world_model.hidden, r);
                break;
            }
            case RewardKind::Rnd: {
                Rng r = make_stream(cfg_.seed, "init.rnd");
                rnd_ = std::make_unique<Rnd>(cfg_.rnd, r);
                break;
            }
            case RewardKind::DeltaProgress:
                progress_ = std::make_unique<ProgressSnapshot>(ProgressMode::Delta, cfg_.progress, wm_->params());
                break;
            case RewardKind::GammaProgress:
                progress_ = std::make_unique<ProgressSnapshot>(ProgressMode::Gamma, cfg_.progress, wm_->params());
                break;
            case RewardKind::Adversarial: break;
        }
    }
    if (artifacts_) {
        fs::create_directories(out_ / artifact::kCheckpoints);
        write_atomically(out_ / artifact::kConfig, [&](std::ostream& os) { os << config_to_json(cfg_); });
        episodes_csv_ = open_csv(out_ / artifact::kEpisodes);
        *episodes_csv_ << kEpisodeColumns << std::flush;
        metrics_csv_ = open_csv(out_ / artifact::kMetrics);
        write_metrics_header(*metrics_csv_);
        metrics_csv_->flush();
        if (cfg_.log_trajectories)
            trajectory_ = std::make_unique<TrajectoryWriter>(
                out_ / artifact::kTrajectory, cfg_.log_hidden ? static_cast<std::uint32_t>(wm_->state_width()) : 0u);
    }
}

Trainer::~Trainer() = default;

template <class Fn>
auto Trainer::stage(const char* op, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const TrainingError&) {
        throw;
    } catch (const std::exception& e) {
        throw TrainingError(episode_, op, e.what());
    }
}

EpisodeRecord Trainer::act() {
    EpisodeRecord ep;
    ep.index = episode_;
    ep.seed = env_rng_();
    Observation o = env_.reset(ep.seed);
    ep.flag = env_.flag();
    WorldModelState s = wm_->initial_state(env_.world());
    const int T = cfg_.env.sim.episode_ticks;
    ep.observations.reserve(T);
    ep.actions.reserve(T);
    ep.states.reserve(T);
    const bool learned = uses_learning(cfg_);
    const auto target = scripted_target(cfg_.policy);
    std::uniform_int_distribution<int> any_action(0, kNumActions - 1);
    while (!env_.done()) {
        ep.observations.push_back(o);
        ep.states.push_back(s);
        const WorldModelState assimilated = assimilate(s, o);
        Action a = Action::NoOp;
        if (learned) {
            const ActionSample x = sample_action(*policy_, assimilated, policy_rng_);
            a = x.action;
            ep.logprobs.push_back(x.logprob);
            ep.values.push_back(x.value);
        } else if (cfg_.policy == PolicyKind::Random) {
            a = static_cast<Action>(any_action(policy_rng_));
        } else if (target) {
            a = scripted_point_action(env_.world(), *target, env_.detector(), cfg_.env.sim, policy_rng_);
        }
        ep.actions.push_back(a);
        s = wm_->predict(assimilated, a);
        StepResult r = env_.step(a);
        ep.events.insert(ep.events.end(), r.events.begin(), r.events.end());
        o = r.observation;
    }
    ep.branch = env_.branch();
    return ep;
}

std::vector<float> Trainer::compute_rewards(const EpisodeRecord& ep) {
    if (cfg_.dense_pink_reward) return pink_visible_reward(ep);
    if (!uses_learning(cfg_)) return {};
    switch (cfg_.reward) {
        case RewardKind::Adversarial: return reward_adversarial(ep, *wm_);
        case RewardKind::Disagreement: return reward_disagreement(ep, *ensemble_);
        case RewardKind::Rnd: return reward_rnd(ep, *rnd_);
        case RewardKind::DeltaProgress:
        case RewardKind::GammaProgress: return reward_progress(ep, *wm_, *progress_);
    }
    return {};
}

void Trainer::update_policy(const EpisodeRecord& ep, const std::vector<float>& scaled, EpisodeStats& st) {
    const bool shift = cfg_.dense_pink_reward || reward_scores_observation(cfg_.reward);
    const auto r = action_rewards(scaled, shift);
    const Advantages adv = compute_gae(r, ep.values, cfg_.ppo.gamma, cfg_.ppo.lambda);
    std::vector<WorldModelState> assimilated(ep.length());
    for (int t = 0; t < ep.length(); ++t) assimilated[t] = assimilate(ep.states[t], ep.observations[t]);
    Rollout ro;
    ro.features = policy_->features(assimilated);
    ro.actions.resize(ep.length());
    for (int t = 0; t < ep.length(); ++t) ro.actions[t] = to_int(ep.actions[t]);
    ro.logprobs = ep.logprobs;
    ro.advantages = adv.advantages;
    ro.returns = adv.returns;
    st.ppo = ppo_update(*policy_, pi_opt_, ro, cfg_.ppo, ppo_rng_);
}

void Trainer::update_aux(const EpisodeRecord& ep) {
    if (ensemble_) {
        for (int k = 0; k < ensemble_->size(); ++k)
            for (int i = 0; i < cfg_.ensemble.iterations; ++i)
                ensemble_->train(k, buffer_.sample_transitions(cfg_.ensemble.batch_size, aux_rng_));
    }
    if (rnd_) {
        for (const auto& o : ep.observations) rnd_->norm().update(o.values);
        std::uniform_int_distribution<int> pick(0, ep.length() - 1);
        std::vector<Observation> batch(cfg_.rnd.batch_size);
        for (int i = 0; i < cfg_.rnd.iterations; ++i) {
            for (auto& o : batch) o = ep.observations[pick(aux_rng_)];
            rnd_->train(batch);
        }
    }
}

void Trainer::update_world_model(EpisodeStats& st) {
    const auto& tc = cfg_.wm_train;
    int applied = 0;
    for (int i = 0; i < tc.iterations; ++i) {
        const auto batch = buffer_.sample_sequences(tc.batch_size, tc.sequence_length, buffer_rng_);
        const TrainStep r = train_batch(*wm_, wm_opt_, batch, tc);
        if (!r.applied) {
            ++st.wm_skipped;
            continue;
        }
        st.wm_loss += r.loss;
        ++applied;
        if (progress_) progress_->after_model_update(wm_->params());
    }
    if (applied > 0) st.wm_loss /= applied;
    if (progress_) progress_->at_episode_end(env_steps_, wm_->params());
}

void Trainer::record(const EpisodeRecord& ep, const EpisodeStats& st) {
    stats_.push_back(st);
    summaries_.push_back(summarize(ep, discretizer_));
    const std::size_t n = summaries_.size();
    const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(cfg_.metrics_window));
    metrics_.push_back(aggregate(std::span<const EpisodeSummary>(summaries_).subspan(n - w, w)));
    if (cfg_.validation_segments > 0) reservoir_.offer(ep);
    if (!artifacts_) return;
    if (trajectory_) trajectory_->append(ep);
    std::ostringstream row;
    row << std::setprecision(9) << st.index << ',' << st.seed << ',' << (st.responsive ? 1 : 0) << ','
        << branch_name(st.branch) << ',' << st.reward_sum << ',' << st.reward_scale << ',' << st.wm_loss << ','
        << st.wm_skipped << ',' << st.ppo.policy_loss << ',' << st.ppo.value_loss << ',' << st.ppo.entropy << ','
        << st.ppo.clip_fraction << ',' << (st.ppo.aborted ? 1 : 0) << '\n';
    *episodes_csv_ << row.str() << std::flush;
    write_metrics_row(*metrics_csv_, metrics_.back());
    metrics_csv_->flush();
}

std::shared_ptr<const EpisodeRecord> Trainer::run_episode() {
    auto ep = std::make_shared<EpisodeRecord>(stage("act", [&] { return act(); }));
    env_steps_ += ep->length();
    EpisodeStats st;
    st.index = ep->index;
    st.seed = ep->seed;
    st.responsive = ep->flag.responsive;
    st.branch = ep->branch;

    std::vector<float> raw = stage("reward", [&] { return compute_rewards(*ep); });
    for (float x : raw) st.reward_sum += x;
    ep->rewards = raw;
    buffer_.push(ep);

    if (uses_learning(cfg_)) {
        scaler_.update(raw);
        st.reward_scale = scaler_.scale();
        const auto scaled = scaler_.apply(raw);
        stage("policy update", [&] { update_policy(*ep, scaled, st); });
        stage("auxiliary update", [&] { update_aux(*ep); });
    }
    stage("world-model update", [&] { update_world_model(st); });
    ++episode_;
    stage("logging", [&] {
        record(*ep, st);
        if (artifacts_ && episode_ % cfg_.checkpoint_every == 0) save_checkpoint(artifact::episode_tag(episode_));
    });
    return ep;
}

void Trainer::save_checkpoint(const std::string& tag) const {
    nn::save_checkpoint(artifact::wm_checkpoint(out_, tag), wm_->params());
    nn::save_checkpoint(artifact::policy_checkpoint(out_, tag), policy_->params());
}

ValidationSet Trainer::validation_set() const {
    Provenance p;
    p.source = uses_learning(cfg_) ? "learned" : "scripted";
    p.reward = cfg_.dense_pink_reward ? "dense-pink"
                                      : (uses_learning(cfg_) ? std::string(reward_name(cfg_.reward))
                                                             : std::string(policy_kind_name(cfg_.policy)));
    p.seed = cfg_.seed;
    p.contingency_p = cfg_.env.contingency_p;
    return reservoir_.finish(p, cfg_.wm_train.burn_in);
}

void Trainer::run(std::ostream* progress) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    while (episode_ < cfg_.episodes) {
        run_episode();
        if (progress) {
            const double secs = std::chrono::duration<double>(clock::now() - t0).count();
            const auto& st = stats_.back();
            const auto& m = metrics_.back();
            *progress << "episode " << st.index + 1 << '/' << cfg_.episodes << "  branch " << branch_name(st.branch)
                      << "  reward " << std::setprecision(4) << st.reward_sum << "  wm " << st.wm_loss
                      << "  act.total " << m.activation.total() << "  " << std::setprecision(1) << std::fixed << secs
                      << "s" << std::defaultfloat << '\n'
                      << std::flush;
        }
    }
    if (!artifacts_) return;
    stage("finalize", [&] {
        save_checkpoint("final");
        const bool have_valset = cfg_.validation_segments > 0 &&
                                 static_cast<int>(reservoir_.segments().size()) == cfg_.validation_segments;
        if (have_valset) save_validation_set(validation_set(), (out_ / artifact::kValset).string());
        nlohmann::json j;
        j["episodes"] = episode_;
        j["env_steps"] = env_steps_;
        j["seed"] = cfg_.seed;
        j["policy"] = std::string(policy_kind_name(cfg_.policy));
        j["reward"] = std::string(reward_name(cfg_.reward));
        j["dense_pink_reward"] = cfg_.dense_pink_reward;
        j["contingency_p"] = cfg_.env.contingency_p;
        j["validation_set"] = have_valset;
        int responsive = 0;
        double reward = 0.0;
        for (const auto& s : stats_) {
            responsive += s.responsive ? 1 : 0;
            reward += s.reward_sum;
        }
        j["responsive_episodes"] = responsive;
        j["mean_episode_reward"] = reward / static_cast<double>(stats_.size());
        const MetricsRow& m = metrics_.back();
        j["final_window"] = {{"first_episode", m.first_episode},
                             {"last_episode", m.last_episode},
                             {"activation_total", m.activation.total()},
                             {"entropy_location", m.entropy.location}};
        write_atomically(out_ / artifact::kSummary, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    });
}

void run_training(const RunConfig& cfg, std::ostream* progress) {
    Trainer t(cfg);
    t.run(progress);
}

RunConfig load_run_config(const fs::path& run) {
    const fs::path p = run / artifact::kConfig;
    if (!fs::exists(p)) throw std::runtime_error("missing run artifact: " + p.string());
    return load_config(p);
}

WorldModel load_run_world_model(const fs::path& run, const std::string& tag) {
    const RunConfig cfg = load_run_config(run);
    const fs::path p = artifact::wm_checkpoint(run, tag);
    if (!fs::exists(p)) throw std::runtime_error("missing run artifact: " + p.string());
    return WorldModel(cfg.world_model, nn::load_checkpoint(p));
}

}  // namespace infant

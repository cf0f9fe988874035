#include "infant/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace infant {

using nlohmann::json;

std::string_view policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::Learned: return "learned";
        case PolicyKind::Random: return "random";
        case PolicyKind::NoOp: return "noop";
        case PolicyKind::PointCaregiver: return "point-caregiver";
        case PolicyKind::PointPink: return "point-pink";
        case PolicyKind::PointGreen: return "point-green";
    }
    return "?";
}

std::optional<PolicyKind> policy_kind_from_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(PolicyKind::PointGreen); ++i)
        if (policy_kind_name(static_cast<PolicyKind>(i)) == name) return static_cast<PolicyKind>(i);
    return std::nullopt;
}

void RunConfig::validate() const {
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (metrics_window < 1) throw ConfigError("metrics_window must be >= 1");
    if (validation_segments < 0) throw ConfigError("validation_segments must be >= 0");
    if (out.empty()) throw ConfigError("out must name a directory");
    try {
        env.validate();
        world_model.validate();
        wm_train.validate();
        policy_net.validate();
        ppo.validate();
        ensemble.validate();
        rnd.validate();
        progress.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (wm_train.sequence_length > env.sim.episode_ticks)
        throw ConfigError("wm_train.sequence_length exceeds the episode length");
}

namespace {

// Each struct lists its fields once; the visitor decides whether to read or write.
template <class V>
void visit(V& v, nn::AdamConfig& c) {
    v("lr", c.lr);
    v("beta1", c.beta1);
    v("beta2", c.beta2);
    v("eps", c.eps);
    v("max_grad_norm", c.max_grad_norm);
}

template <class V>
void visit(V& v, SimConfig& c) {
    v("room_half_extent", c.room_half_extent);
    v("dt", c.dt);
    v("gravity", c.gravity);
    v("ball_radius", c.ball_radius);
    v("restitution", c.restitution);
    v("rolling_friction", c.rolling_friction);
    v("bounce_threshold", c.bounce_threshold);
    v("infant_radius", c.infant_radius);
    v("shoulder_offset", c.shoulder_offset);
    v("arm_upper_len", c.arm_upper_len);
    v("arm_fore_len", c.arm_fore_len);
    v("arm_radius", c.arm_radius);
    v("joint_limit", c.joint_limit);
    v("infant_move_speed", c.infant_move_speed);
    v("infant_turn_rate", c.infant_turn_rate);
    v("joint_rate", c.joint_rate);
    v("caregiver_radius", c.caregiver_radius);
    v("caregiver_move_speed", c.caregiver_move_speed);
    v("pickup_radius", c.pickup_radius);
    v("carry_height", c.carry_height);
    v("throw_speed", c.throw_speed);
    v("throw_elevation", c.throw_elevation);
    v("roll_speed", c.roll_speed);
    v("caregiver_start_distance", c.caregiver_start_distance);
    v("ball_start_lateral", c.ball_start_lateral);
    v("ball_start_forward", c.ball_start_forward);
    v("infant_start_joints", c.infant_start_joints);
    v("episode_ticks", c.episode_ticks);
}

template <class V>
void visit(V& v, PointingConfig& c) {
    v("body_tolerance", c.body_tolerance);
    v("arm_tolerance", c.arm_tolerance);
    v("hold_ticks", c.hold_ticks);
}

template <class V>
void visit(V& v, CaregiverConfig& c) {
    v.object("pointing", c.pointing);
    v("hide_min_distance", c.hide_min_distance);
    v("hide_max_distance", c.hide_max_distance);
    v("hide_half_width", c.hide_half_width);
    v("arrive_tolerance", c.arrive_tolerance);
    v("roll_distance", c.roll_distance);
    v("roll_wait_ticks", c.roll_wait_ticks);
    v("chase_wait_ticks", c.chase_wait_ticks);
}

template <class V>
void visit(V& v, WorldModelConfig& c) {
    v("hidden", c.hidden);
    v("layers", c.layers);
    v("decoder_hidden", c.decoder_hidden);
}

template <class V>
void visit(V& v, WmTrainConfig& c) {
    v("sequence_length", c.sequence_length);
    v("burn_in", c.burn_in);
    v("batch_size", c.batch_size);
    v("iterations", c.iterations);
    v.object("adam", c.adam);
}

template <class V>
void visit(V& v, PolicyConfig& c) {
    v("hidden", c.hidden);
}

template <class V>
void visit(V& v, PpoConfig& c) {
    v("clip", c.clip);
    v("gamma", c.gamma);
    v("lambda", c.lambda);
    v("epochs", c.epochs);
    v("minibatch", c.minibatch);
    v("entropy_coef", c.entropy_coef);
    v("value_coef", c.value_coef);
    v("normalize_advantages", c.normalize_advantages);
    v.object("adam", c.adam);
}

template <class V>
void visit(V& v, EnsembleConfig& c) {
    v("members", c.members);
    v("hidden", c.hidden);
    v("batch_size", c.batch_size);
    v("iterations", c.iterations);
    v.object("adam", c.adam);
}

template <class V>
void visit(V& v, RndConfig& c) {
    v("embedding", c.embedding);
    v("hidden", c.hidden);
    v("batch_size", c.batch_size);
    v("iterations", c.iterations);
    v("clip", c.clip);
    v.object("adam", c.adam);
}

template <class V>
void visit(V& v, ProgressConfig& c) {
    v("delta_steps", c.delta_steps);
    v("gamma", c.gamma);
}

template <class V>
void visit(V& v, RunConfig& c) {
    v("seed", c.seed);
    v.named("reward", c.reward, reward_name, reward_from_name);
    v.named("policy", c.policy, policy_kind_name, policy_kind_from_name);
    v("dense_pink_reward", c.dense_pink_reward);
    v("episodes", c.episodes);
    v("contingency_p", c.env.contingency_p);
    v("replay_capacity", c.replay_capacity);
    v("checkpoint_every", c.checkpoint_every);
    v("metrics_window", c.metrics_window);
    v("log_trajectories", c.log_trajectories);
    v("log_hidden", c.log_hidden);
    v("validation_segments", c.validation_segments);
    v("out", c.out);
    v.object("sim", c.env.sim);
    v.object("caregiver", c.env.caregiver);
    v.object("world_model", c.world_model);
    v.object("wm_train", c.wm_train);
    v.object("policy_net", c.policy_net);
    v.object("ppo", c.ppo);
    v.object("ensemble", c.ensemble);
    v.object("rnd", c.rnd);
    v.object("progress", c.progress);
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <class T>
    void operator()(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            T v = it->template get<T>();
            if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!it->is_number_integer()) throw ConfigError("expected an integer");
            }
            out = std::move(v);
        } catch (const json::exception&) {
            throw ConfigError(path_ + key + ": wrong type");
        } catch (const ConfigError&) {
            throw ConfigError(path_ + key + ": expected an integer");
        }
    }

    template <class T>
    void object(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        Reader sub(*it, path_ + key + ".");
        visit(sub, out);
        sub.finish();
    }

    template <class T, class Name, class Parse>
    void named(const char* key, T& out, Name, Parse parse) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_string()) throw ConfigError(path_ + key + ": expected a string");
        const auto v = parse(it->template get<std::string>());
        if (!v) throw ConfigError(path_ + key + ": unknown value '" + it->template get<std::string>() + "'");
        out = *v;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown config key: " + path_ + it.key());
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_.substr(0, path_.size() - 1); }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

class Writer {
public:
    json j = json::object();

    template <class T>
    void operator()(const char* key, T& v) {
        j[key] = v;
    }

    template <class T>
    void object(const char* key, T& v) {
        Writer sub;
        visit(sub, v);
        j[key] = std::move(sub.j);
    }

    template <class T, class Name, class Parse>
    void named(const char* key, T& v, Name name, Parse) {
        j[key] = std::string(name(v));
    }
};

}  // namespace

RunConfig parse_config(std::string_view json_text, const RunConfig& base) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c = base;
    Reader r(j, "");
    visit(r, c);
    r.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), base);
}

std::string config_to_json(const RunConfig& c) {
    RunConfig copy = c;
    Writer w;
    visit(w, copy);
    return w.j.dump(2) + "\n";
}

}  // namespace infant

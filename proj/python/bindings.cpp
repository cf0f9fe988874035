#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "infant/binio.hpp"
#include "infant/cli.hpp"
#include "infant/experiments.hpp"
#include "infant/trainer.hpp"

namespace py = pybind11;
using namespace infant;

namespace {

py::array_t<float> to_array(const Observation& o) {
    py::array_t<float> a(kObsDim);
    std::copy(o.values.begin(), o.values.end(), a.mutable_data());
    return a;
}

py::dict event_dict(const FsmEvent& e) {
    py::dict d;
    d["tick"] = e.tick;
    d["kind"] = std::string(event_name(e.kind));
    d["phase"] = std::string(phase_name(e.phase));
    d["arg"] = static_cast<int>(e.arg);
    return d;
}

Action action_arg(int code) {
    const auto a = action_from_int(code);
    if (!a) throw py::value_error("action must be in [0, " + std::to_string(kNumActions) + ")");
    return *a;
}

py::dict episode_dict(const EpisodeRecord& ep) {
    const auto T = static_cast<py::ssize_t>(ep.length());
    py::array_t<float> obs({T, static_cast<py::ssize_t>(kObsDim)});
    py::array_t<float> belief({T, static_cast<py::ssize_t>(kBeliefDim)});
    py::array_t<std::uint8_t> actions(T);
    for (py::ssize_t t = 0; t < T; ++t) {
        std::copy(ep.observations[t].values.begin(), ep.observations[t].values.end(), obs.mutable_data(t, 0));
        std::copy(ep.states[t].b.begin(), ep.states[t].b.end(), belief.mutable_data(t, 0));
        actions.mutable_at(t) = static_cast<std::uint8_t>(ep.actions[t]);
    }
    py::list events;
    for (const auto& e : ep.events) events.append(event_dict(e));
    py::dict d;
    d["index"] = ep.index;
    d["seed"] = ep.seed;
    d["responsive"] = ep.flag.responsive;
    d["contingency_p"] = ep.flag.p;
    d["branch"] = std::string(branch_name(ep.branch));
    d["observations"] = obs;
    d["belief"] = belief;
    d["actions"] = actions;
    d["rewards"] = py::array_t<float>(static_cast<py::ssize_t>(ep.rewards.size()), ep.rewards.data());
    d["events"] = events;
    return d;
}

py::dict metrics_dict(const MetricsRow& m) {
    py::dict d;
    d["first_episode"] = m.first_episode;
    d["last_episode"] = m.last_episode;
    d["entropy"] = py::dict(py::arg("location") = m.entropy.location, py::arg("orientation") = m.entropy.orientation,
                            py::arg("pose") = m.entropy.pose, py::arg("attention") = m.entropy.attention);
    py::dict act;
    for (int b = 0; b < 4; ++b) act[py::str(std::string(branch_name(static_cast<Branch>(b))))] = m.activation.proportion[b];
    act["total"] = m.activation.total();
    d["activation"] = act;
    d["participation"] = py::dict(py::arg("hide") = m.participation[0], py::arg("roll") = m.participation[1],
                                  py::arg("chase") = m.participation[2]);
    d["mean_reward"] = m.mean_reward;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Simulated infant room, world model and intrinsic-reward training";

    m.attr("OBS_DIM") = kObsDim;
    m.attr("BELIEF_DIM") = kBeliefDim;
    m.attr("NUM_ACTIONS") = kNumActions;
    m.attr("LAYOUT_HASH") = layout_hash();

    m.def("action_names", [] {
        std::vector<std::string> out;
        for (int i = 0; i < kNumActions; ++i) out.emplace_back(action_name(static_cast<Action>(i)));
        return out;
    });
    m.def("observation_fields", [] {
        py::list out;
        for (const auto& f : observation_fields())
            out.append(py::make_tuple(std::string(f.name), f.obs_offset, f.width, std::string(group_name(f.group))));
        return out;
    }, "(name, offset, width, group) for every observation field");

    py::class_<Environment>(m, "Environment")
        .def(py::init([](double contingency_p, int episode_ticks) {
                 EnvConfig c;
                 c.contingency_p = contingency_p;
                 c.sim.episode_ticks = episode_ticks;
                 c.validate();
                 return Environment(c);
             }),
             py::arg("contingency_p") = 1.0, py::arg("episode_ticks") = 2000)
        .def("reset", [](Environment& e, std::uint64_t seed) { return to_array(e.reset(seed)); }, py::arg("seed"))
        .def("reset_with_flag",
             [](Environment& e, std::uint64_t seed, bool responsive) {
                 return to_array(e.reset(seed, ContingencyFlag{responsive, e.config().contingency_p}));
             },
             py::arg("seed"), py::arg("responsive"))
        .def("step",
             [](Environment& e, int action) {
                 if (e.done()) throw py::value_error("episode is over; call reset");
                 const StepResult r = e.step(action_arg(action));
                 py::list events;
                 for (const auto& ev : r.events) events.append(event_dict(ev));
                 return py::make_tuple(to_array(r.observation), events, r.done);
             },
             py::arg("action"), "Returns (observation, events, done)")
        .def("scripted_point_action",
             [](Environment& e, const std::string& target, std::uint64_t seed) {
                 PointTarget t;
                 if (target == "caregiver") t = PointTarget::Caregiver;
                 else if (target == "pink") t = PointTarget::PinkBall;
                 else if (target == "green") t = PointTarget::GreenBall;
                 else throw py::value_error("target must be caregiver, pink or green");
                 Rng rng(seed);
                 return to_int(scripted_point_action(e.world(), t, e.detector(), e.config().sim, rng));
             },
             py::arg("target"), py::arg("seed") = 0)
        .def_property_readonly("done", &Environment::done)
        .def_property_readonly("tick", [](const Environment& e) { return e.world().tick; })
        .def_property_readonly("branch", [](const Environment& e) { return std::string(branch_name(e.branch())); })
        .def_property_readonly("responsive", [](const Environment& e) { return e.flag().responsive; })
        .def_property_readonly("phase", [](const Environment& e) { return std::string(phase_name(e.fsm().phase)); });

    m.def("default_config", [] { return config_to_json(RunConfig{}); }, "Every config key with its default, as JSON");
    m.def("normalize_config", [](const std::string& text) { return config_to_json(parse_config(text)); },
          py::arg("json"), "Validates a JSON config and returns it with defaults filled in");

    m.def(
        "train",
        [](const std::string& config_json, bool progress) {
            const RunConfig c = parse_config(config_json);
            py::gil_scoped_release release;
            std::ostringstream sink;
            run_training(c, progress ? &sink : nullptr);
            return sink.str();
        },
        py::arg("config_json"), py::arg("progress") = false,
        "Trains one agent into config['out']; returns the progress log when requested");

    m.def(
        "read_trajectory",
        [](const std::string& path) {
            const TrajectoryLog log = read_trajectory_log(path);
            py::list eps;
            for (const auto& ep : log.episodes) eps.append(episode_dict(ep));
            return py::make_tuple(eps, log.truncated);
        },
        py::arg("path"), "Returns (episodes, truncated)");

    m.def("final_metrics", [](const std::string& run) { return metrics_dict(final_metrics(run)); }, py::arg("run"));

    m.def(
        "normalized_entropy",
        [](const std::vector<std::int64_t>& counts) { return normalized_entropy(counts); }, py::arg("counts"),
        "Entropy of a histogram as a percentage of the uniform entropy");

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::vector<std::string> all{"infant-sim"};
            all.insert(all.end(), args.begin(), args.end());
            std::vector<const char*> argv;
            for (const auto& a : all) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one infant-sim command; returns (exit_code, stdout, stderr)");

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
}

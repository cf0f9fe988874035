#include "infant/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "infant/experiments.hpp"

namespace infant::cli {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string reward;
    std::optional<double> contingency_p;
    std::optional<int> episodes;
    std::string out;
    std::string policy;
    bool dense_pink = false;
    bool quiet = false;
};

RunConfig base_config(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

RunConfig train_config(const TrainArgs& a) {
    RunConfig c = base_config(a.config);
    if (a.seed) c.seed = *a.seed;
    if (!a.reward.empty()) {
        const auto k = reward_from_name(a.reward);
        if (!k) throw ConfigError("unknown reward '" + a.reward + "'");
        c.reward = *k;
    }
    if (!a.policy.empty()) {
        const auto k = policy_kind_from_name(a.policy);
        if (!k) throw ConfigError("unknown policy '" + a.policy + "'");
        c.policy = *k;
    }
    if (a.contingency_p) c.env.contingency_p = *a.contingency_p;
    if (a.episodes) c.episodes = *a.episodes;
    if (!a.out.empty()) c.out = a.out;
    if (a.dense_pink) c.dense_pink_reward = true;
    c.validate();
    return c;
}

// Episodes from a run directory or a trajectory file.
std::vector<EpisodeRecord> load_episodes(const std::string& source) {
    fs::path p = source;
    if (fs::is_directory(p)) p /= artifact::kTrajectory;
    const TrajectoryLog log = read_trajectory_log(p);
    return log.episodes;
}

std::vector<EpisodeRecord> last_n(std::vector<EpisodeRecord> eps, int window) {
    if (window > 0 && static_cast<int>(eps.size()) > window) eps.erase(eps.begin(), eps.end() - window);
    return eps;
}

void print_csv(std::ostream& out, const std::string& text, const std::string& path) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << text;
}

// NAME=PATH pairs.
std::pair<std::string, std::string> split_named(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) return {fs::path(s).filename().string(), s};
    return {s.substr(0, eq), s.substr(eq + 1)};
}

std::string num(double x) {
    std::ostringstream ss;
    ss << std::setprecision(9) << x;
    return ss.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulated infant with intrinsic-reward learning: training, evaluation and experiment harnesses",
                 "infant-sim"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train one agent and write its run directory");
    train->add_option("--config", ta.config, "JSON config; unknown keys are rejected");
    train->add_option("--seed", ta.seed, "Master seed");
    train->add_option("--reward", ta.reward, "adversarial|disagreement|rnd|delta-progress|gamma-progress");
    train->add_option("--contingency-p", ta.contingency_p, "Probability that the caregiver is responsive");
    train->add_option("--episodes", ta.episodes, "Episodes to run");
    train->add_option("--out", ta.out, "Run directory");
    train->add_option("--policy", ta.policy, "learned|random|noop|point-caregiver|point-pink|point-green");
    train->add_flag("--dense-pink", ta.dense_pink, "Reward 1 whenever the pink ball is in view");
    train->add_flag("--quiet", ta.quiet, "No per-episode progress lines");

    std::string source;
    int window = 100;
    auto* ent = app.add_subcommand("eval-entropy", "Normalized behavior entropies over the last episodes of a log");
    ent->add_option("source", source, "Run directory or trajectory file")->required();
    ent->add_option("--window", window, "Episodes to pool (0 = all)");
    auto* act = app.add_subcommand("eval-activations", "Branch activation and participation over the last episodes");
    act->add_option("source", source, "Run directory or trajectory file")->required();
    act->add_option("--window", window, "Episodes to pool (0 = all)");

    std::string out_path, scripted;
    int burn_in = 10, segments = kValidationSegments;
    std::uint64_t set_seed = 0;
    auto* vset = app.add_subcommand("build-valset", "Sample validation segments from a log or a scripted infant");
    vset->add_option("source", source, "Run directory or trajectory file logged with hidden states");
    vset->add_option("--scripted", scripted, "point-caregiver|point-pink|point-green instead of a log");
    vset->add_option("--config", ta.config, "Environment config for scripted sets");
    vset->add_option("--out", out_path, "Output file")->required();
    vset->add_option("--burn-in", burn_in, "Burn-in steps");
    vset->add_option("--segments", segments, "Segment count");
    vset->add_option("--seed", set_seed, "Sampling seed");

    std::vector<std::string> model_args, set_args;
    std::string tag = "final";
    auto* rr = app.add_subcommand("round-robin", "Score every model on every validation set");
    rr->add_option("--model", model_args, "NAME=RUN_DIR (repeatable)")->required();
    rr->add_option("--set", set_args, "NAME=VALSET (repeatable)")->required();
    rr->add_option("--tag", tag, "Checkpoint tag");
    rr->add_option("--out", out_path, "CSV path (default stdout)");

    std::string run_dir, set_path;
    auto* dec = app.add_subcommand("decompose", "Per-component open-loop loss of a checkpoint on a validation set");
    dec->add_option("--run", run_dir, "Run directory")->required();
    dec->add_option("--set", set_path, "Validation set")->required();
    dec->add_option("--tag", tag, "Checkpoint tag");
    dec->add_option("--out", out_path, "CSV path (default stdout)");

    Exp1Config e1;
    std::string e1_out = "exp1";
    auto* exp1 = app.add_subcommand("exp1", "Reward-kind comparison: tables and round-robin matrix");
    exp1->add_option("--config", ta.config, "Base JSON config");
    exp1->add_option("--out", e1_out, "Experiment directory");
    exp1->add_option("--episodes", e1.episodes, "Episodes per run");
    exp1->add_option("--seeds", e1.seeds, "Seeds");
    exp1->add_option("--agents", e1.agents, "Reward kinds and/or 'random'");
    bool e1_aggregate_only = false;
    exp1->add_flag("--aggregate-only", e1_aggregate_only, "Fail instead of training missing runs");
    bool no_scripted = false;
    exp1->add_flag("--no-scripted", no_scripted, "Skip the scripted validation sets");

    Exp2Config e2;
    std::string e2_out = "exp2";
    auto* exp2 = app.add_subcommand("exp2", "Contingency-level sweep and loss decomposition");
    exp2->add_option("--config", ta.config, "Base JSON config");
    exp2->add_option("--out", e2_out, "Experiment directory");
    exp2->add_option("--episodes", e2.episodes, "Episodes per run");
    exp2->add_option("--seeds", e2.seeds, "Seeds");
    exp2->add_option("--levels", e2.levels, "Contingency probabilities");
    bool e2_aggregate_only = false;
    exp2->add_flag("--aggregate-only", e2_aggregate_only, "Fail instead of training missing runs");

    auto* exp_csv = app.add_subcommand("export-csv", "Lossless CSV dump of a trajectory log");
    exp_csv->add_option("source", source, "Run directory or trajectory file")->required();
    exp_csv->add_option("--out", out_path, "CSV path (default stdout)");

    std::string csv_path, x_col, title;
    std::vector<std::string> y_cols;
    bool bar = false;
    auto* plot = app.add_subcommand("plot", "SVG chart from CSV columns");
    plot->add_option("csv", csv_path, "Input CSV")->required();
    plot->add_option("--x", x_col, "X column (line charts) or label column (bar charts)")->required();
    plot->add_option("--y", y_cols, "Y column(s)")->required();
    plot->add_option("--out", out_path, "SVG path")->required();
    plot->add_option("--title", title, "Chart title");
    plot->add_flag("--bar", bar, "Bar chart of the first Y column");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) {
            const RunConfig c = train_config(ta);
            run_training(c, ta.quiet ? nullptr : &out);
            out << "wrote " << c.out << '\n';
        } else if (ent->parsed()) {
            const auto eps = last_n(load_episodes(source), window);
            if (eps.empty()) throw std::runtime_error("log has no episodes");
            const Discretizer d;
            BehaviorHistogram h(d);
            for (const auto& ep : eps)
                for (const auto& o : ep.observations) h.add(o, d);
            const EntropyReport r = behavior_entropy(h);
            out << "episodes,entropy.location,entropy.orientation,entropy.pose,entropy.attention\n"
                << eps.size() << ',' << num(r.location) << ',' << num(r.orientation) << ',' << num(r.pose) << ','
                << num(r.attention) << '\n';
        } else if (act->parsed()) {
            const auto eps = last_n(load_episodes(source), window);
            if (eps.empty()) throw std::runtime_error("log has no episodes");
            const Discretizer d;
            std::vector<EpisodeSummary> sums;
            for (const auto& ep : eps) sums.push_back(summarize(ep, d));
            const MetricsRow m = aggregate(sums);
            const auto& p = m.activation.proportion;
            out << "episodes,act.hide,act.roll,act.chase,act.independent,act.total,part.hide,part.roll,part.chase\n"
                << eps.size() << ',' << num(p[1]) << ',' << num(p[2]) << ',' << num(p[3]) << ',' << num(p[0]) << ','
                << num(m.activation.total());
            for (double x : m.participation) out << ',' << (std::isnan(x) ? std::string("nan") : num(x));
            out << '\n';
        } else if (vset->parsed()) {
            ValidationSet v;
            if (!scripted.empty()) {
                const RunConfig c = base_config(ta.config);
                const std::map<std::string, PointTarget> targets{{"point-caregiver", PointTarget::Caregiver},
                                                                 {"point-pink", PointTarget::PinkBall},
                                                                 {"point-green", PointTarget::GreenBall}};
                const auto it = targets.find(scripted);
                if (it == targets.end()) {
                    err << "unknown scripted agent '" << scripted << "'\n";
                    return kExitUsage;
                }
                v = scripted_validation_set(it->second, c.env, burn_in, set_seed, segments);
            } else {
                if (source.empty()) {
                    err << "build-valset needs a source log or --scripted\n";
                    return kExitUsage;
                }
                fs::path p = source;
                if (fs::is_directory(p)) p /= artifact::kTrajectory;
                const TrajectoryLog log = read_trajectory_log(p);
                if (log.header.state_width == 0)
                    throw std::runtime_error("trajectory log has no recurrent states; train with log_hidden");
                Provenance prov{"learned", "", set_seed, log.episodes.empty() ? 1.0 : log.episodes[0].flag.p};
                if (fs::is_directory(source)) {
                    const RunConfig rc = load_run_config(source);
                    prov = {rc.policy == PolicyKind::Learned ? "learned" : "scripted", std::string(reward_name(rc.reward)),
                            rc.seed, rc.env.contingency_p};
                }
                Rng rng(set_seed);
                v = build_validation_set(log.episodes, burn_in, prov, rng, segments);
            }
            save_validation_set(v, out_path);
            out << "wrote " << v.segments.size() << " segments to " << out_path << '\n';
        } else if (rr->parsed()) {
            std::vector<std::unique_ptr<WorldModel>> models;
            std::vector<ValidationSet> sets;
            std::vector<NamedModel> nm;
            std::vector<NamedSet> ns;
            for (const auto& m : model_args) {
                const auto [name, path] = split_named(m);
                models.push_back(std::make_unique<WorldModel>(load_run_world_model(path, tag)));
                nm.push_back({name, models.back().get(), name});
            }
            sets.reserve(set_args.size());
            for (const auto& s : set_args) {
                const auto [name, path] = split_named(s);
                sets.push_back(load_validation_set(path));
                ns.push_back({name, &sets.back(), name});
            }
            std::ostringstream ss;
            write_round_robin_csv(ss, round_robin(nm, ns));
            print_csv(out, ss.str(), out_path);
        } else if (dec->parsed()) {
            const WorldModel wm = load_run_world_model(run_dir, tag);
            const LossDecomposition d = decompose_on_set(wm, load_validation_set(set_path));
            std::ostringstream ss;
            ss << "group,loss\n";
            for (int g = 0; g < kNumGroups; ++g)
                ss << group_name(static_cast<ComponentGroup>(g)) << ',' << num(d.group[g]) << '\n';
            ss << "total," << num(d.total()) << '\n';
            print_csv(out, ss.str(), out_path);
        } else if (exp1->parsed()) {
            e1.base = base_config(ta.config);
            e1.out = e1_out;
            e1.train_missing = !e1_aggregate_only;
            e1.scripted_sets = !no_scripted;
            run_experiment1(e1, &out);
            out << "wrote " << e1.out.string() << '\n';
        } else if (exp2->parsed()) {
            e2.base = base_config(ta.config);
            e2.out = e2_out;
            e2.train_missing = !e2_aggregate_only;
            run_experiment2(e2, &out);
            out << "wrote " << e2.out.string() << '\n';
        } else if (exp_csv->parsed()) {
            fs::path p = source;
            if (fs::is_directory(p)) p /= artifact::kTrajectory;
            const TrajectoryLog log = read_trajectory_log(p);
            if (out_path.empty()) {
                export_trajectory_csv(log, out);
            } else {
                std::ofstream os(out_path, std::ios::trunc);
                if (!os) throw std::runtime_error("cannot open " + out_path + " for writing");
                export_trajectory_csv(log, os);
            }
            if (log.truncated) err << "warning: trailing partial episode ignored\n";
        } else if (plot->parsed()) {
            const CsvTable t = read_csv(csv_path);
            std::string svg;
            if (bar) {
                const int lc = t.column(x_col);
                std::vector<std::string> labels;
                for (const auto& r : t.rows) labels.push_back(lc < static_cast<int>(r.size()) ? r[lc] : "");
                svg = svg_bar_chart(title.empty() ? y_cols[0] : title, labels, t.numbers(y_cols[0]));
            } else {
                std::vector<Series> series;
                const auto x = t.numbers(x_col);
                for (const auto& y : y_cols) series.push_back({y, x, t.numbers(y)});
                svg = svg_line_chart(title.empty() ? csv_path : title, x_col, series);
            }
            std::ofstream os(out_path, std::ios::trunc);
            if (!os) throw std::runtime_error("cannot open " + out_path + " for writing");
            os << svg;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace infant::cli

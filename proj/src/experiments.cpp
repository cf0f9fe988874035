#include "infant/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "infant/binio.hpp"

namespace infant {

namespace fs = std::filesystem;

ValidationSet scripted_validation_set(PointTarget target, const EnvConfig& env_cfg, int burn_in, std::uint64_t seed,
                                      int segments, int episodes) {
    Environment env(env_cfg);
    Rng rng = make_stream(seed, "scripted", static_cast<std::uint64_t>(target));
    SegmentReservoir res(segments, burn_in + kValidationHorizon, rng());
    for (int e = 0; e < episodes; ++e) {
        EpisodeRecord ep;
        ep.index = e;
        Observation o = env.reset(rng());
        while (!env.done()) {
            WorldModelState s;
            s.b = belief_from_world(env.world());
            ep.observations.push_back(o);
            ep.states.push_back(std::move(s));
            const Action a = scripted_point_action(env.world(), target, env.detector(), env_cfg.sim, rng);
            ep.actions.push_back(a);
            o = env.step(a).observation;
        }
        res.offer(ep);
    }
    static constexpr const char* kNames[] = {"point-caregiver", "point-pink", "point-green"};
    return res.finish({"scripted", kNames[static_cast<int>(target)], seed, env_cfg.contingency_p}, burn_in);
}

ValidationSet merge_validation_sets(std::span<const ValidationSet> sets, int count, Provenance p, Rng& rng) {
    if (sets.empty()) throw std::invalid_argument("merge_validation_sets: no sets");
    std::vector<const Sequence*> pool;
    for (const auto& s : sets) {
        if (s.burn_in != sets[0].burn_in || s.horizon != sets[0].horizon)
            throw std::invalid_argument("merge_validation_sets: segment lengths differ");
        for (const auto& q : s.segments) pool.push_back(&q);
    }
    if (static_cast<int>(pool.size()) < count)
        throw std::invalid_argument("merge_validation_sets: only " + std::to_string(pool.size()) + " segments");
    std::shuffle(pool.begin(), pool.end(), rng);
    ValidationSet out;
    out.provenance = std::move(p);
    out.burn_in = sets[0].burn_in;
    out.horizon = sets[0].horizon;
    for (int i = 0; i < count; ++i) out.segments.push_back(*pool[i]);
    return out;
}

MetricsRow final_metrics(const fs::path& run) {
    const fs::path p = run / artifact::kMetrics;
    std::ifstream is(p);
    if (!is) throw std::runtime_error("missing run artifact: " + p.string());
    const auto rows = read_metrics_csv(is);
    if (rows.empty()) throw std::runtime_error("run has no metrics rows: " + p.string());
    return rows.back();
}

std::string run_name(const std::string& agent, std::uint64_t seed) { return agent + "_s" + std::to_string(seed); }

std::string level_name(double p, std::uint64_t seed) {
    std::ostringstream ss;
    ss << "p" << p << "_s" << seed;
    return ss.str();
}

namespace {

bool run_complete(const fs::path& dir) { return fs::exists(dir / artifact::kSummary); }

void ensure_run(const RunConfig& cfg, bool train_missing, std::ostream* progress) {
    const fs::path dir = cfg.out;
    if (run_complete(dir)) {
        if (progress) *progress << "reusing " << dir.string() << '\n';
        return;
    }
    if (!train_missing) throw std::runtime_error("missing run artifact: " + (dir / artifact::kSummary).string());
    if (progress) *progress << "training " << dir.string() << '\n';
    run_training(cfg, progress);
}

ValidationSet load_run_valset(const fs::path& run) {
    const fs::path p = run / artifact::kValset;
    if (!fs::exists(p)) throw std::runtime_error("missing run artifact: " + p.string());
    return load_validation_set(p.string());
}

std::string fmt(double x) {
    std::ostringstream ss;
    ss << std::setprecision(9) << x;
    return ss.str();
}

template <class Fn>
void write_text(const fs::path& path, Fn&& body) {
    write_atomically(path, [&](std::ostream& os) {
        std::ostringstream ss;
        body(ss);
        os << ss.str();
    });
}

// Checkpoint tags of a run in episode order, "final" last.
std::vector<std::string> checkpoint_tags(const fs::path& run) {
    std::vector<std::string> tags;
    const fs::path dir = run / artifact::kCheckpoints;
    if (!fs::exists(dir)) return tags;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string n = e.path().filename().string();
        if (n.rfind("wm_e", 0) == 0 && e.path().extension() == ".bin") tags.push_back(n.substr(3, n.size() - 7));
    }
    std::sort(tags.begin(), tags.end());
    if (fs::exists(artifact::wm_checkpoint(run, "final"))) tags.push_back("final");
    return tags;
}

}  // namespace

void run_experiment1(const Exp1Config& cfg, std::ostream* progress) {
    if (cfg.agents.empty() || cfg.seeds.empty()) throw std::invalid_argument("exp1: need at least one agent and seed");
    fs::create_directories(cfg.out / "runs");
    struct Run {
        std::string agent;
        std::uint64_t seed;
        fs::path dir;
    };
    std::vector<Run> runs;
    for (const auto& agent : cfg.agents) {
        RunConfig c = cfg.base;
        if (agent == "random") {
            c.policy = PolicyKind::Random;
        } else {
            const auto kind = reward_from_name(agent);
            if (!kind) throw std::invalid_argument("exp1: unknown agent '" + agent + "'");
            c.policy = PolicyKind::Learned;
            c.reward = *kind;
        }
        c.episodes = cfg.episodes;
        for (auto seed : cfg.seeds) {
            c.seed = seed;
            c.out = (cfg.out / "runs" / run_name(agent, seed)).string();
            ensure_run(c, cfg.train_missing, progress);
            runs.push_back({agent, seed, c.out});
        }
    }

    std::vector<MetricsRow> finals;
    for (const auto& r : runs) finals.push_back(final_metrics(r.dir));

    write_text(cfg.out / "table1_entropy.csv", [&](std::ostream& os) {
        os << "agent,seed,entropy.location,entropy.orientation,entropy.pose,entropy.attention\n";
        std::map<std::string, std::array<double, 4>> sum;
        std::map<std::string, int> n;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& e = finals[i].entropy;
            os << runs[i].agent << ',' << runs[i].seed << ',' << fmt(e.location) << ',' << fmt(e.orientation) << ','
               << fmt(e.pose) << ',' << fmt(e.attention) << '\n';
            auto& s = sum[runs[i].agent];
            s[0] += e.location, s[1] += e.orientation, s[2] += e.pose, s[3] += e.attention;
            ++n[runs[i].agent];
        }
        for (const auto& agent : cfg.agents) {
            os << agent << ",mean";
            for (double v : sum[agent]) os << ',' << fmt(v / n[agent]);
            os << '\n';
        }
    });

    write_text(cfg.out / "table2_activation.csv", [&](std::ostream& os) {
        os << "agent,seed,act.hide,act.roll,act.chase,act.total,part.hide,part.roll,part.chase\n";
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& a = finals[i].activation;
            os << runs[i].agent << ',' << runs[i].seed << ',' << fmt(a.proportion[1]) << ',' << fmt(a.proportion[2])
               << ',' << fmt(a.proportion[3]) << ',' << fmt(a.total());
            for (double p : finals[i].participation) os << ',' << (std::isnan(p) ? std::string("nan") : fmt(p));
            os << '\n';
        }
    });

    write_text(cfg.out / "reference.csv", [&](std::ostream& os) {
        os << "metric,agent,reference_value,note\n"
           << "act.total,random,0.39,20M-step reference\n"
           << "act.total,rnd,0.91,20M-step reference\n"
           << "act.total,disagreement,0.87,20M-step reference\n"
           << "entropy.location,disagreement,93,20M-step reference\n"
           << "entropy.location,random,5,20M-step reference\n";
    });

    // Round-robin over final models and every validation set.
    std::vector<std::unique_ptr<WorldModel>> models;
    std::vector<ValidationSet> sets;
    std::vector<NamedModel> named_models;
    std::vector<std::string> set_names;
    for (const auto& r : runs) {
        models.push_back(std::make_unique<WorldModel>(load_run_world_model(r.dir)));
        sets.push_back(load_run_valset(r.dir));
        set_names.push_back(run_name(r.agent, r.seed));
    }
    if (cfg.scripted_sets) {
        const PointTarget targets[] = {PointTarget::Caregiver, PointTarget::PinkBall, PointTarget::GreenBall};
        for (PointTarget t : targets) {
            if (progress) *progress << "building scripted validation set " << static_cast<int>(t) << '\n';
            sets.push_back(scripted_validation_set(t, cfg.base.env, cfg.base.wm_train.burn_in, cfg.base.seed,
                                                   cfg.base.validation_segments));
            set_names.push_back("scripted." + sets.back().provenance.reward);
        }
    }
    std::vector<NamedSet> named_sets;
    for (std::size_t i = 0; i < sets.size(); ++i) named_sets.push_back({set_names[i], &sets[i], set_names[i]});
    for (std::size_t i = 0; i < runs.size(); ++i)
        named_models.push_back({set_names[i], models[i].get(), set_names[i]});
    if (progress) *progress << "round-robin " << named_models.size() << " x " << named_sets.size() << '\n';
    const RoundRobin rr = round_robin(named_models, named_sets);
    write_text(cfg.out / "round_robin.csv", [&](std::ostream& os) { write_round_robin_csv(os, rr); });
}

void run_experiment2(const Exp2Config& cfg, std::ostream* progress) {
    if (cfg.levels.empty() || cfg.seeds.empty()) throw std::invalid_argument("exp2: need at least one level and seed");
    fs::create_directories(cfg.out / "runs");
    struct Run {
        double p;
        std::uint64_t seed;
        fs::path dir;
    };
    std::vector<Run> runs;
    for (double p : cfg.levels) {
        for (auto seed : cfg.seeds) {
            RunConfig c = cfg.base;
            c.policy = PolicyKind::Learned;
            c.reward = RewardKind::Disagreement;
            c.env.contingency_p = p;
            c.episodes = cfg.episodes;
            c.seed = seed;
            c.out = (cfg.out / "runs" / level_name(p, seed)).string();
            ensure_run(c, cfg.train_missing, progress);
            runs.push_back({p, seed, c.out});
        }
    }

    write_text(cfg.out / "activation.csv", [&](std::ostream& os) {
        os << "level,seed,episodes,responsive_rate,act.hide,act.roll,act.chase,act.independent\n";
        for (const auto& r : runs) {
            const CsvTable t = read_csv(r.dir / artifact::kEpisodes);
            const auto resp = t.numbers("responsive");
            const int bcol = t.column("branch");
            std::vector<Branch> branches;
            for (const auto& row : t.rows) branches.push_back(branch_from_name(row[bcol]).value_or(Branch::Independent));
            const ActivationStats a = activation_stats(branches);
            double rate = 0.0;
            for (double x : resp) rate += x;
            rate /= std::max<std::size_t>(1, resp.size());
            os << fmt(r.p) << ',' << r.seed << ',' << t.rows.size() << ',' << fmt(rate) << ',' << fmt(a.proportion[1])
               << ',' << fmt(a.proportion[2]) << ',' << fmt(a.proportion[3]) << ',' << fmt(a.proportion[0]) << '\n';
        }
    });

    std::vector<ValidationSet> high, low;
    for (const auto& r : runs) {
        if (r.p >= cfg.high_threshold) high.push_back(load_run_valset(r.dir));
        if (r.p <= cfg.low_threshold) low.push_back(load_run_valset(r.dir));
    }
    std::vector<std::pair<std::string, ValidationSet>> pooled;
    Rng rng = make_stream(cfg.base.seed, "exp2.merge");
    if (!high.empty())
        pooled.emplace_back("HC", merge_validation_sets(high, cfg.base.validation_segments,
                                                        {"learned", "disagreement", cfg.base.seed, cfg.high_threshold}, rng));
    if (!low.empty())
        pooled.emplace_back("LC", merge_validation_sets(low, cfg.base.validation_segments,
                                                        {"learned", "disagreement", cfg.base.seed, cfg.low_threshold}, rng));
    if (pooled.empty()) throw std::invalid_argument("exp2: no level falls in the high or low contingency pools");
    for (const auto& [name, set] : pooled) save_validation_set(set, (cfg.out / (name + "_valset.bin")).string());

    write_text(cfg.out / "sets.csv", [&](std::ostream& os) {
        os << "run,level,seed,pool\n";
        for (const auto& r : runs) {
            const std::string pool = r.p >= cfg.high_threshold ? "HC" : (r.p <= cfg.low_threshold ? "LC" : "");
            os << level_name(r.p, r.seed) << ',' << fmt(r.p) << ',' << r.seed << ',' << pool << '\n';
        }
    });

    write_text(cfg.out / "decomposition.csv", [&](std::ostream& os) {
        os << "level,seed,checkpoint,episode_range,set,group,loss\n";
        for (const auto& r : runs) {
            std::int64_t prev = 0;
            for (const auto& tag : checkpoint_tags(r.dir)) {
                const std::int64_t end = tag == "final" ? cfg.episodes : std::stoll(tag.substr(1));
                if (tag == "final" && end == prev) continue;  // same weights as the last periodic checkpoint
                const WorldModel wm = load_run_world_model(r.dir, tag);
                if (progress) *progress << "decomposing " << r.dir.string() << " " << tag << '\n';
                for (const auto& [name, set] : pooled) {
                    const LossDecomposition d = decompose_on_set(wm, set);
                    for (int g = 0; g < kNumGroups; ++g)
                        os << fmt(r.p) << ',' << r.seed << ',' << tag << ',' << prev << '-' << end << ',' << name << ','
                           << group_name(static_cast<ComponentGroup>(g)) << ',' << fmt(d.group[g]) << '\n';
                }
                prev = end;
            }
        }
    });
}

// ---- CSV and SVG ----

int CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("csv: no column named '" + name + "'");
    return static_cast<int>(it - header.begin());
}

std::vector<double> CsvTable::numbers(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) {
        double v = std::numeric_limits<double>::quiet_NaN();
        if (c < static_cast<int>(r.size())) {
            try {
                std::size_t used = 0;
                v = std::stod(r[c], &used);
                if (used != r[c].size()) v = std::numeric_limits<double>::quiet_NaN();
            } catch (const std::exception&) {
            }
        }
        out.push_back(v);
    }
    return out;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        return f;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw FormatError("csv " + path.string() + " is empty");
    t.header = split(line);
    while (std::getline(is, line))
        if (!line.empty()) t.rows.push_back(split(line));
    return t;
}

namespace {

constexpr double kW = 720, kH = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

void frame(std::ostream& os, const std::string& title, double y0, double y1) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n"
       << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\""
       << kH - kBottom << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = y0 + (y1 - y0) * i / 4.0;
        const double y = kH - kBottom - (kH - kTop - kBottom) * i / 4.0;
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << std::setprecision(3) << v
           << "</text>\n";
    }
}

std::pair<double, double> range_of(const std::vector<double>& v, bool from_zero) {
    double lo = from_zero ? 0.0 : std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (std::isfinite(x)) lo = std::min(lo, x), hi = std::max(hi, x);
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
    if (hi - lo < 1e-12) hi = lo + 1.0;
    return {lo, hi};
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
    std::vector<double> xs, ys;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("svg_line_chart: x and y lengths differ");
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        ys.insert(ys.end(), s.y.begin(), s.y.end());
    }
    const auto [x0, x1] = range_of(xs, false);
    const auto [y0, y1] = range_of(ys, false);
    std::ostringstream os;
    frame(os, title, y0, y1);
    os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">"
       << escape(x_label) << "</text>\n";
    os << "<text x=\"" << kLeft << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">" << std::setprecision(4)
       << x0 << "</text>\n<text x=\"" << kW - kRight << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
       << x1 << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kColors[k % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            if (!std::isfinite(series[k].y[i])) continue;
            const double px = kLeft + (series[k].x[i] - x0) / (x1 - x0) * (kW - kLeft - kRight);
            const double py = kH - kBottom - (series[k].y[i] - y0) / (y1 - y0) * (kH - kTop - kBottom);
            os << std::fixed << std::setprecision(1) << px << ',' << py << ' ';
        }
        os << std::defaultfloat << "\"/>\n";
        const double ly = kTop + 18.0 * static_cast<double>(k);
        os << "<rect x=\"" << kW - kRight + 12 << "\" y=\"" << ly << "\" width=\"12\" height=\"3\" fill=\"" << color
           << "\"/>\n<text x=\"" << kW - kRight + 30 << "\" y=\"" << ly + 5 << "\">" << escape(series[k].name)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
    if (labels.size() != values.size()) throw std::invalid_argument("svg_bar_chart: labels and values differ");
    const auto [y0, y1] = range_of(values, true);
    std::ostringstream os;
    frame(os, title, y0, y1);
    const double slot = (kW - kLeft - kRight) / std::max<std::size_t>(1, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::isfinite(values[i]) ? values[i] : 0.0;
        const double h = (v - y0) / (y1 - y0) * (kH - kTop - kBottom);
        const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
        os << "<rect x=\"" << x << "\" y=\"" << kH - kBottom - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
           << "\" fill=\"" << kColors[i % std::size(kColors)] << "\"/>\n"
           << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
           << escape(labels[i]) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace infant

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "infant/trainer.hpp"

namespace infant {

// Validation data from a scripted pointing infant. The stored state is the
// ground-truth belief with an empty recurrent state, so any model can be
// scored on it from zero h and c.
ValidationSet scripted_validation_set(PointTarget target, const EnvConfig& env, int burn_in, std::uint64_t seed,
                                      int segments = kValidationSegments, int episodes = 5);

// Uniform subsample of the union of several sets (all must share a length).
ValidationSet merge_validation_sets(std::span<const ValidationSet> sets, int count, Provenance p, Rng& rng);

// Final-window metrics of a finished run, read from its metrics CSV.
MetricsRow final_metrics(const std::filesystem::path& run);

struct Exp1Config {
    // Reward kinds plus "random" for the random-action baseline.
    std::vector<std::string> agents{"adversarial", "disagreement", "rnd", "delta-progress", "gamma-progress", "random"};
    std::vector<std::uint64_t> seeds{0, 1};
    int episodes = 150;
    bool scripted_sets = true;
    bool train_missing = true;  // false: aggregate existing runs only
    RunConfig base;
    std::filesystem::path out = "exp1";
};

// Trains (or reuses) one run per agent and seed, then writes entropy and
// activation tables, the round-robin matrix and paper reference values.
void run_experiment1(const Exp1Config& cfg, std::ostream* progress = nullptr);

struct Exp2Config {
    std::vector<double> levels{0.01, 0.05, 0.2, 0.8, 0.95, 0.99};
    std::vector<std::uint64_t> seeds{0};
    int episodes = 100;
    double high_threshold = 0.95;  // HC sets pool runs with p >= this
    double low_threshold = 0.05;   // LC sets pool runs with p <= this
    bool train_missing = true;
    RunConfig base;
    std::filesystem::path out = "exp2";
};

// Disagreement agents at each contingency level; per-component loss of every
// checkpoint on pooled high- and low-contingency validation sets.
void run_experiment2(const Exp2Config& cfg, std::ostream* progress = nullptr);

std::string run_name(const std::string& agent, std::uint64_t seed);
std::string level_name(double p, std::uint64_t seed);

// Utilitarian SVG charts.
struct Series {
    std::string name;
    std::vector<double> x, y;
};
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series);
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);

// Reads a CSV into named columns; non-numeric cells become NaN.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // throws when absent
    std::vector<double> numbers(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace infant

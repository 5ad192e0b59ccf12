#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arena/learner.hpp"

namespace arena {

struct AgentSpec {
    AgentMode mode = AgentMode::LioBenign;
    double c_adv = 50.0;
};

struct RunConfig {
    std::string preset = "custom";
    std::string env = "er";  // er | ipd
    int n_agents = 2;
    int m_lever = 1;
    int max_steps = 5;
    int episode_length = 5;  // IPD rounds
    int episodes = 30000;
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    Hyperparams hp;
    double r_max = 3.0;
    int policy_hidden = 32;
    int incentive_hidden = 16;
    double init_stddev = 0.1;            // policy weights
    double incentive_init_stddev = 0.1;  // incentive-channel weights
    double incentive_bias_init = -2.0;
    double explore_eps = 0.0;
    // Exploration schedule: explore_eps decays linearly to explore_eps_final
    // over the first explore_decay_episodes environment episodes. A negative
    // final value (default) means no decay.
    double explore_eps_final = -1.0;
    int explore_decay_episodes = 0;

    int conv_window = 1000;
    double conv_threshold = 0.95;

    std::vector<AgentSpec> roster;
    std::vector<std::string> warnings;  // filled during validation

    void validate();
    // Materialized key = value text, every default made explicit.
    std::string echo() const;
};

// Applies flat `key = value` lines ('#' comments) onto a base config.
RunConfig parse_config_text(const std::string& text, RunConfig base = RunConfig{});
RunConfig load_config(const std::string& path);
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct RunRecord {
    int episode = 0;       // environment episodes consumed before this iteration
    double success = -1.0;  // batch success rate, -1 when no success is defined
    std::vector<double> env_return, total_return, inc_given, inc_recv;
};

struct ProbeEvent {
    int agent = 0;
    int action = 0;
    double incentive_received = 0.0;
};

struct RunSummary {
    std::string preset;
    std::uint64_t seed = 0;
    long convergence_episode = -1;  // -1 = never
    double final_success_rate = 0.0;
    bool success_defined = true;
    int adversary_top_reward = -1;  // 1/0, -1 when no adversary in the roster
};

struct RunResult {
    std::vector<RunRecord> records;
    RunSummary summary;
    std::vector<ProbeEvent> probe_events;       // final conv_window episodes
    std::vector<std::string> roles;             // per agent, from final-window behavior
};

// Builds the roster, trains for cfg.episodes iterations, streams metrics.
// Fully deterministic given (cfg, seed).
RunResult run_experiment(const RunConfig& cfg, std::uint64_t seed);

// Smallest e >= window-1 with trailing-window mean >= threshold.
std::optional<long> convergence_episode(const std::vector<double>& success_series, int window,
                                        double threshold);

struct ProbeRow {
    int agent = 0;
    std::string role;
    std::string action;
    double mean_incentive_received = 0.0;
    long count = 0;
};

std::vector<ProbeRow> incentive_probe(const std::vector<ProbeEvent>& events,
                                      const std::vector<std::string>& roles,
                                      const std::vector<std::string>& action_names);

std::vector<std::string> action_names_for(const std::string& env);

// File emission (episodes.csv / summary.csv / probe.csv / charts). Contents
// are deterministic; reals print with 17 significant digits.
void emit_run_outputs(const RunConfig& cfg, const RunResult& result, const std::string& dir);
void write_summary_csv(const std::string& path, const std::vector<RunSummary>& summaries);
void write_probe_csv(const std::string& path, const std::vector<ProbeRow>& rows);

struct MultiResult {
    std::vector<RunSummary> summaries;
    std::vector<RunResult> runs;  // seed order
};

// Runs n_seeds independent seeds (cfg.seed, cfg.seed+1, ...), up to `parallel`
// at a time, and writes out_dir/seed_<s>/... plus out_dir/summary.csv.
// keep_runs retains per-run records in memory for callers that inspect them.
MultiResult run_many(const RunConfig& cfg, int n_seeds, int parallel, const std::string& out_dir,
                     bool keep_runs = false);

// Re-aggregates probe.csv from stored probe_events.csv files under dir.
void probe_from_dir(const std::string& dir, const std::string& out_path);

std::string format_real(double v);  // %.17g

}  // namespace arena

#include "arena/expctl.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

namespace fs = std::filesystem;

namespace arena {
namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected real, got '" + value + "'");
    }
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "env") {
        if (value != "er" && value != "ipd") {
            throw ConfigError("config key 'env': expected er or ipd, got '" + value + "'");
        }
        cfg.env = value;
    } else if (key == "n_agents") {
        cfg.n_agents = static_cast<int>(parse_long(key, value));
    } else if (key == "m_lever") {
        cfg.m_lever = static_cast<int>(parse_long(key, value));
    } else if (key == "max_steps") {
        cfg.max_steps = static_cast<int>(parse_long(key, value));
    } else if (key == "episode_length") {
        cfg.episode_length = static_cast<int>(parse_long(key, value));
    } else if (key == "episodes") {
        cfg.episodes = static_cast<int>(parse_long(key, value));
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_long(key, value));
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "gamma") {
        cfg.hp.gamma = parse_double(key, value);
    } else if (key == "beta") {
        cfg.hp.beta = parse_double(key, value);
    } else if (key == "alpha") {
        cfg.hp.alpha = parse_double(key, value);
    } else if (key == "eta_lr") {
        cfg.hp.eta_lr = parse_double(key, value);
    } else if (key == "batch") {
        cfg.hp.batch = static_cast<int>(parse_long(key, value));
    } else if (key == "r_max") {
        cfg.r_max = parse_double(key, value);
    } else if (key == "policy_hidden") {
        cfg.policy_hidden = static_cast<int>(parse_long(key, value));
    } else if (key == "incentive_hidden") {
        cfg.incentive_hidden = static_cast<int>(parse_long(key, value));
    } else if (key == "init_stddev") {
        cfg.init_stddev = parse_double(key, value);
    } else if (key == "incentive_init_stddev") {
        cfg.incentive_init_stddev = parse_double(key, value);
    } else if (key == "incentive_bias_init") {
        cfg.incentive_bias_init = parse_double(key, value);
    } else if (key == "explore_eps") {
        cfg.explore_eps = parse_double(key, value);
    } else if (key == "explore_eps_final") {
        cfg.explore_eps_final = parse_double(key, value);
    } else if (key == "explore_decay_episodes") {
        cfg.explore_decay_episodes = static_cast<int>(parse_long(key, value));
    } else if (key == "conv_window") {
        cfg.conv_window = static_cast<int>(parse_long(key, value));
    } else if (key == "conv_threshold") {
        cfg.conv_threshold = parse_double(key, value);
    } else if (key.rfind("agent.", 0) == 0) {
        const size_t dot = key.find('.', 6);
        if (dot == std::string::npos) throw ConfigError("bad roster key '" + key + "'");
        const long idx = parse_long(key, key.substr(6, dot - 6));
        const std::string field = key.substr(dot + 1);
        if (idx < 0 || idx > 63) throw ConfigError("roster index out of range in '" + key + "'");
        if (cfg.roster.size() <= static_cast<size_t>(idx)) {
            cfg.roster.resize(static_cast<size_t>(idx) + 1);
        }
        if (field == "mode") {
            cfg.roster[static_cast<size_t>(idx)].mode = mode_from_name(value);
        } else if (field == "c_adv") {
            cfg.roster[static_cast<size_t>(idx)].c_adv = parse_double(key, value);
        } else {
            throw ConfigError("unknown roster field in '" + key + "'");
        }
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

}  // namespace

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = parse_config_text(buf.str());
    cfg.validate();
    return cfg;
}

void RunConfig::validate() {
    warnings.clear();
    if (env != "er" && env != "ipd") throw ConfigError("env must be er or ipd");
    if (env == "er") {
        if (n_agents < 2) throw ConfigError("n_agents must be >= 2 for er");
        if (m_lever < 1 || m_lever >= n_agents) {
            throw ConfigError("m_lever must satisfy 1 <= m_lever < n_agents (M<N)");
        }
        if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    } else {
        if (n_agents != 2) throw ConfigError("ipd supports exactly 2 agents");
        if (episode_length < 1) throw ConfigError("episode_length must be >= 1");
    }
    if (episodes < 0) throw ConfigError("episodes must be >= 0");
    if (conv_window < 1) throw ConfigError("conv_window must be >= 1");
    if (!(conv_threshold > 0.0 && conv_threshold <= 1.0)) {
        throw ConfigError("conv_threshold must be in (0, 1]");
    }
    hp.validate();
    if (r_max <= 0.0) throw ConfigError("r_max must be positive");
    if (policy_hidden < 1 || incentive_hidden < 1) {
        throw ConfigError("hidden layer sizes must be >= 1");
    }
    if (init_stddev < 0.0) throw ConfigError("init_stddev must be >= 0");
    if (incentive_init_stddev < 0.0) throw ConfigError("incentive_init_stddev must be >= 0");
    if (explore_eps < 0.0 || explore_eps >= 1.0) {
        throw ConfigError("explore_eps must be in [0, 1)");
    }
    if (explore_eps_final >= 1.0) {
        throw ConfigError("explore_eps_final must be in [0, 1) or negative for no decay");
    }
    if (explore_decay_episodes < 0) {
        throw ConfigError("explore_decay_episodes must be >= 0");
    }

    if (roster.empty()) {
        roster.assign(static_cast<size_t>(n_agents), AgentSpec{});
    }
    if (roster.size() != static_cast<size_t>(n_agents)) {
        throw ConfigError("roster declares " + std::to_string(roster.size()) +
                          " agents but n_agents = " + std::to_string(n_agents));
    }
    int adversaries = 0;
    for (const auto& spec : roster) {
        if (is_adversarial(spec.mode)) ++adversaries;
    }
    if (adversaries > 1) throw ConfigError("at most one adversarial agent per run");

    const double max_env = env == "er" ? 10.0 : 0.0;
    for (size_t i = 0; i < roster.size(); ++i) {
        if (roster[i].mode == AgentMode::FakeIncentive &&
            !fake_incentive_dominates(roster[i].c_adv, max_env, r_max)) {
            warnings.push_back("agent." + std::to_string(i) + ".c_adv = " +
                               format_real(roster[i].c_adv) +
                               " does not dominate env/channel rewards");
        }
    }
}

std::string RunConfig::echo() const {
    std::ostringstream out;
    out << "preset = " << preset << "\n";
    out << "env = " << env << "\n";
    out << "n_agents = " << n_agents << "\n";
    if (env == "er") {
        out << "m_lever = " << m_lever << "\n";
        out << "max_steps = " << max_steps << "\n";
    } else {
        out << "episode_length = " << episode_length << "\n";
    }
    out << "episodes = " << episodes << "\n";
    out << "seed = " << seed << "\n";
    out << "out_dir = " << out_dir << "\n";
    out << "gamma = " << format_real(hp.gamma) << "\n";
    out << "beta = " << format_real(hp.beta) << "\n";
    out << "alpha = " << format_real(hp.alpha) << "\n";
    out << "eta_lr = " << format_real(hp.eta_lr) << "\n";
    out << "batch = " << hp.batch << "\n";
    out << "r_max = " << format_real(r_max) << "\n";
    out << "policy_hidden = " << policy_hidden << "\n";
    out << "incentive_hidden = " << incentive_hidden << "\n";
    out << "init_stddev = " << format_real(init_stddev) << "\n";
    out << "incentive_init_stddev = " << format_real(incentive_init_stddev) << "\n";
    out << "incentive_bias_init = " << format_real(incentive_bias_init) << "\n";
    out << "explore_eps = " << format_real(explore_eps) << "\n";
    out << "explore_eps_final = " << format_real(explore_eps_final) << "\n";
    out << "explore_decay_episodes = " << explore_decay_episodes << "\n";
    out << "conv_window = " << conv_window << "\n";
    out << "conv_threshold = " << format_real(conv_threshold) << "\n";
    for (size_t i = 0; i < roster.size(); ++i) {
        out << "agent." << i << ".mode = " << mode_name(roster[i].mode) << "\n";
        if (roster[i].mode == AgentMode::FakeIncentive) {
            out << "agent." << i << ".c_adv = " << format_real(roster[i].c_adv) << "\n";
        }
    }
    for (const auto& w : warnings) out << "# warning: " << w << "\n";
    return out.str();
}

namespace {

RunConfig base_preset(const std::string& name, const std::string& env, int n, int m) {
    RunConfig cfg;
    cfg.preset = name;
    cfg.env = env;
    cfg.n_agents = n;
    cfg.m_lever = m;
    cfg.roster.assign(static_cast<size_t>(n), AgentSpec{});
    // Tuned training recipe shared by the presets: batched updates, mild
    // exploration, a small gift-cost weight and near-flat initial channels.
    cfg.hp.beta = 0.05;
    cfg.hp.eta_lr = 0.01;
    cfg.hp.alpha = 0.1;
    cfg.hp.batch = 10;
    cfg.r_max = 2.0;
    cfg.init_stddev = 0.6;
    cfg.incentive_init_stddev = 0.3;
    cfg.incentive_bias_init = -2.5;
    cfg.explore_eps = 0.07;
    cfg.conv_threshold = 0.95;
    return cfg;
}

// Four-agent rooms need faster, better-funded incentive channels and an
// exploration schedule: coordination events are rarer, so gifts start near
// mid-range and exploration anneals once the division of labor forms.
void er4_tune(RunConfig& cfg) {
    cfg.hp.beta = 0.04;
    cfg.hp.eta_lr = 0.1;
    cfg.hp.alpha = 0.01;
    cfg.r_max = 3.0;
    cfg.incentive_init_stddev = 0.05;
    cfg.incentive_bias_init = -0.5;
    cfg.explore_eps = 0.15;
    cfg.explore_eps_final = 0.03;
    cfg.explore_decay_episodes = 15000;
}

// The ER(4,3) room pins a stricter gift-cost regime: with cheap gifts the
// benign agents learn to neutralize adversaries with flat bribes, which
// masks the manipulation effects the room is meant to isolate.
void er43_tune(RunConfig& cfg) {
    er4_tune(cfg);
    cfg.hp.alpha = 0.1;
    cfg.r_max = 2.0;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"er2_lio",     "er42_lio",    "er43_lio",    "ipd_lio",    "er2_partial",
            "er42_partial", "ipd_partial", "er2_fake",    "er2_bypass", "er42_bypass",
            "er43_bypass",  "er2_reverse", "er42_reverse", "er43_reverse"};
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;
    if (name == "er2_lio") {
        cfg = base_preset(name, "er", 2, 1);
    } else if (name == "er42_lio") {
        cfg = base_preset(name, "er", 4, 2);
        er4_tune(cfg);
    } else if (name == "er43_lio") {
        cfg = base_preset(name, "er", 4, 3);
        er43_tune(cfg);
    } else if (name == "ipd_lio") {
        cfg = base_preset(name, "ipd", 2, 1);
    } else if (name == "er2_partial") {
        cfg = base_preset(name, "er", 2, 1);
        cfg.roster.back().mode = AgentMode::PartialComm;
    } else if (name == "er42_partial") {
        cfg = base_preset(name, "er", 4, 2);
        er4_tune(cfg);
        cfg.roster.back().mode = AgentMode::PartialComm;
    } else if (name == "ipd_partial") {
        cfg = base_preset(name, "ipd", 2, 1);
        cfg.roster.back().mode = AgentMode::PartialComm;
    } else if (name == "er2_fake") {
        cfg = base_preset(name, "er", 2, 1);
        cfg.roster.back().mode = AgentMode::FakeIncentive;
        cfg.roster.back().c_adv = 50.0;
        // The fabricated bonus floods the benign learning signal with
        // zero-mean noise. A smaller inner step and a larger batch damp that
        // noise so the benign agent settles on its rational stay-put policy,
        // and exploration anneals so residual lever visits fade out.
        cfg.hp.beta = 0.01;
        cfg.hp.batch = 20;
        cfg.explore_eps_final = 0.005;
        cfg.explore_decay_episodes = 12000;
    } else if (name == "er2_bypass") {
        cfg = base_preset(name, "er", 2, 1);
        cfg.roster.back().mode = AgentMode::Bypass;
    } else if (name == "er42_bypass") {
        cfg = base_preset(name, "er", 4, 2);
        er4_tune(cfg);
        cfg.roster.back().mode = AgentMode::Bypass;
    } else if (name == "er43_bypass") {
        cfg = base_preset(name, "er", 4, 3);
        er43_tune(cfg);
        cfg.roster.back().mode = AgentMode::Bypass;
    } else if (name == "er2_reverse") {
        cfg = base_preset(name, "er", 2, 1);
        cfg.roster.back().mode = AgentMode::Reverse;
        // With generous gifts the benign agent learns to pay the saboteur at
        // the door so the reversed update herds it away from sabotage; a
        // tight gift cap plus annealed exploration keeps the sabotage visible.
        cfg.r_max = 0.5;
        cfg.explore_eps_final = 0.005;
        cfg.explore_decay_episodes = 12000;
    } else if (name == "er42_reverse") {
        cfg = base_preset(name, "er", 4, 2);
        er4_tune(cfg);
        cfg.roster.back().mode = AgentMode::Reverse;
    } else if (name == "er43_reverse") {
        cfg = base_preset(name, "er", 4, 3);
        er43_tune(cfg);
        cfg.roster.back().mode = AgentMode::Reverse;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    cfg.validate();
    return cfg;
}

std::optional<long> convergence_episode(const std::vector<double>& success_series, int window,
                                        double threshold) {
    if (window < 1) throw ConfigError("convergence window must be >= 1");
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ConfigError("convergence threshold must be in (0, 1]");
    }
    double running = 0.0;
    for (size_t e = 0; e < success_series.size(); ++e) {
        running += success_series[e];
        if (e >= static_cast<size_t>(window)) running -= success_series[e - window];
        if (e + 1 >= static_cast<size_t>(window) && running >= threshold * window - 1e-9) {
            return static_cast<long>(e);
        }
    }
    return std::nullopt;
}

std::vector<std::string> action_names_for(const std::string& env) {
    if (env == "er") return {"start", "lever", "door"};
    return {"C", "D"};
}

std::vector<ProbeRow> incentive_probe(const std::vector<ProbeEvent>& events,
                                      const std::vector<std::string>& roles,
                                      const std::vector<std::string>& action_names) {
    // Keyed by (agent, action); role comes from the per-run role table.
    std::map<std::pair<int, int>, std::pair<double, long>> acc;
    for (const auto& ev : events) {
        auto& slot = acc[{ev.agent, ev.action}];
        slot.first += ev.incentive_received;
        slot.second += 1;
    }
    std::vector<ProbeRow> rows;
    rows.reserve(acc.size());
    for (const auto& [key, sum_count] : acc) {
        ProbeRow row;
        row.agent = key.first;
        row.role = key.first < static_cast<int>(roles.size()) ? roles[static_cast<size_t>(key.first)]
                                                              : "na";
        row.action = action_names[static_cast<size_t>(key.second)];
        row.count = sum_count.second;
        row.mean_incentive_received = sum_count.first / static_cast<double>(sum_count.second);
        rows.push_back(std::move(row));
    }
    return rows;
}

RunResult run_experiment(const RunConfig& config, std::uint64_t seed) {
    RunConfig cfg = config;
    cfg.validate();

    std::unique_ptr<Env> env;
    if (cfg.env == "er") {
        env = std::make_unique<EscapeRoom>(cfg.n_agents, cfg.m_lever, cfg.max_steps);
    } else {
        env = std::make_unique<IteratedPd>(cfg.episode_length);
    }
    const int n = cfg.n_agents;
    std::mt19937_64 rng(seed);

    std::vector<Agent> agents;
    agents.reserve(static_cast<size_t>(n));
    const Mlp policy_shape(env->obs_size(), cfg.policy_hidden, env->action_count());
    for (int i = 0; i < n; ++i) {
        const AgentSpec& spec = cfg.roster[static_cast<size_t>(i)];
        Agent agent(i, spec.mode, policy_shape);
        agent.c_adv = spec.c_adv;
        agent.explore_eps = cfg.explore_eps;
        agent.policy_params = policy_shape.random_params(rng, cfg.init_stddev);
        if (agent.gives_learned_channel()) {
            agent.incentive.emplace(env->obs_size(), n - 1, env->action_count(),
                                    cfg.incentive_hidden, cfg.r_max);
            agent.incentive->init_random(rng, cfg.incentive_init_stddev, cfg.incentive_bias_init);
        }
        agents.push_back(std::move(agent));
    }

    // One iteration consumes a training batch plus an evaluation batch, so the
    // episode budget maps to episodes / (2 * batch) iterations; windows given
    // in episodes are mapped to iterations the same way.
    const int episodes_per_iter = 2 * cfg.hp.batch;
    const int n_iters = cfg.episodes / episodes_per_iter;
    const int window_iters = std::max(1, cfg.conv_window / episodes_per_iter);

    RunResult result;
    result.records.reserve(static_cast<size_t>(n_iters));
    std::vector<double> success_series;
    success_series.reserve(static_cast<size_t>(n_iters));
    std::vector<std::vector<long>> action_counts(
        static_cast<size_t>(n), std::vector<long>(static_cast<size_t>(env->action_count()), 0));

    const int probe_start = std::max(0, n_iters - window_iters);
    const bool decay = cfg.explore_eps_final >= 0.0 && cfg.explore_decay_episodes > 0;
    Trajectory traj;
    for (int e = 0; e < n_iters; ++e) {
        if (decay) {
            const double frac = std::min(
                1.0, static_cast<double>(e * episodes_per_iter) / cfg.explore_decay_episodes);
            const double eps =
                cfg.explore_eps + frac * (cfg.explore_eps_final - cfg.explore_eps);
            for (auto& agent : agents) agent.explore_eps = eps;
        }
        const IterationMetrics m = lio_iteration(*env, agents, cfg.hp, rng, &traj);

        RunRecord rec;
        rec.episode = e * episodes_per_iter;
        rec.success = env->success_defined() ? m.success_rate : -1.0;
        rec.env_return = m.env_return;
        rec.total_return = m.total_return;
        rec.inc_given = m.inc_given;
        rec.inc_recv = m.inc_received;
        result.records.push_back(std::move(rec));
        if (env->success_defined()) success_series.push_back(m.success_rate);

        if (e >= probe_start) {
            for (const auto& s : traj.steps) {
                for (int a = 0; a < n; ++a) {
                    const int action = s.actions[static_cast<size_t>(a)];
                    action_counts[static_cast<size_t>(a)][static_cast<size_t>(action)] += 1;
                    result.probe_events.push_back(
                        {a, action, s.incentives.received_by(a)});
                }
            }
        }
    }

    // Roles from final-window behavior: the m_lever agents with the most
    // lever actions are labeled "lever", the rest "door". Ranking is more
    // robust than per-agent modal actions because door-role agents often
    // spend most steps waiting at start.
    result.roles.resize(static_cast<size_t>(n), "na");
    if (cfg.env == "er") {
        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return action_counts[static_cast<size_t>(a)][1] >
                   action_counts[static_cast<size_t>(b)][1];
        });
        for (int r = 0; r < n; ++r) {
            result.roles[static_cast<size_t>(order[static_cast<size_t>(r)])] =
                r < cfg.m_lever ? "lever" : "door";
        }
    }

    RunSummary& summary = result.summary;
    summary.preset = cfg.preset;
    summary.seed = seed;
    summary.success_defined = env->success_defined();
    if (env->success_defined()) {
        const auto conv = convergence_episode(success_series, window_iters, cfg.conv_threshold);
        summary.convergence_episode = conv ? *conv * episodes_per_iter : -1;
        double hits = 0.0;
        long span = 0;
        for (size_t e = success_series.size() > static_cast<size_t>(window_iters)
                            ? success_series.size() - window_iters
                            : 0;
             e < success_series.size(); ++e) {
            hits += success_series[e];
            ++span;
        }
        summary.final_success_rate = span > 0 ? hits / span : 0.0;
    } else {
        summary.convergence_episode = -1;
        summary.final_success_rate = 0.0;
    }

    int adversary = -1;
    for (int i = 0; i < n; ++i) {
        if (is_adversarial(cfg.roster[static_cast<size_t>(i)].mode)) adversary = i;
    }
    if (adversary >= 0 && !result.records.empty()) {
        std::vector<double> mean_return(static_cast<size_t>(n), 0.0);
        size_t start = result.records.size() > static_cast<size_t>(window_iters)
                           ? result.records.size() - window_iters
                           : 0;
        long span = 0;
        for (size_t e = start; e < result.records.size(); ++e) {
            for (int a = 0; a < n; ++a) {
                mean_return[static_cast<size_t>(a)] +=
                    result.records[e].total_return[static_cast<size_t>(a)];
            }
            ++span;
        }
        bool top = true;
        for (int a = 0; a < n; ++a) {
            if (a != adversary &&
                mean_return[static_cast<size_t>(adversary)] <= mean_return[static_cast<size_t>(a)]) {
                top = false;
            }
        }
        summary.adversary_top_reward = top ? 1 : 0;
    }
    return result;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractError("cannot open '" + path + "' for writing");
    out << contents;
    if (!out) throw ContractError("write failed for '" + path + "'");
}

std::string episodes_csv(const RunResult& result, int n_agents) {
    std::ostringstream out;
    out << "episode,success";
    for (const char* col : {"env_return_", "total_return_", "inc_given_", "inc_recv_"}) {
        for (int a = 0; a < n_agents; ++a) out << "," << col << a;
    }
    out << "\n";
    for (const auto& rec : result.records) {
        out << rec.episode << ",";
        if (rec.success >= 0) out << format_real(rec.success);
        for (const auto* cols : {&rec.env_return, &rec.total_return, &rec.inc_given, &rec.inc_recv}) {
            for (double v : *cols) out << "," << format_real(v);
        }
        out << "\n";
    }
    return out.str();
}

std::string svg_chart(const std::vector<double>& series) {
    const int width = 800, height = 400, margin = 40;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    if (!series.empty()) {
        double lo = series[0], hi = series[0];
        for (double v : series) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < 1e-12) hi = lo + 1.0;
        const size_t stride = std::max<size_t>(1, series.size() / 1600);
        out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1\" points=\"";
        for (size_t i = 0; i < series.size(); i += stride) {
            const double x =
                margin + (width - 2.0 * margin) * (series.size() > 1
                                                       ? static_cast<double>(i) / (series.size() - 1)
                                                       : 0.0);
            const double y = height - margin - (height - 2.0 * margin) * (series[i] - lo) / (hi - lo);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
            out << buf;
        }
        out << "\"/>\n";
        char lab[128];
        std::snprintf(lab, sizeof(lab), "<text x=\"4\" y=\"14\" font-size=\"12\">min %.6g max %.6g</text>\n",
                      lo, hi);
        out << lab;
    }
    out << "</svg>\n";
    return out.str();
}

std::vector<double> rolling_mean(const std::vector<double>& series, int window) {
    std::vector<double> out;
    out.reserve(series.size());
    double acc = 0.0;
    for (size_t i = 0; i < series.size(); ++i) {
        acc += series[i];
        if (i >= static_cast<size_t>(window)) acc -= series[i - window];
        const size_t span = std::min(i + 1, static_cast<size_t>(window));
        out.push_back(acc / static_cast<double>(span));
    }
    return out;
}

}  // namespace

void write_summary_csv(const std::string& path, const std::vector<RunSummary>& summaries) {
    std::ostringstream out;
    out << "preset,seed,convergence_episode,final_success_rate,adversary_top_reward\n";
    for (const auto& s : summaries) {
        out << s.preset << "," << s.seed << ",";
        if (s.convergence_episode >= 0) out << s.convergence_episode;
        out << ",";
        if (s.success_defined) out << format_real(s.final_success_rate);
        out << ",";
        if (s.adversary_top_reward >= 0) out << s.adversary_top_reward;
        out << "\n";
    }
    write_file(path, out.str());
}

void write_probe_csv(const std::string& path, const std::vector<ProbeRow>& rows) {
    std::ostringstream out;
    out << "agent,role,action,mean_incentive_received,count\n";
    for (const auto& r : rows) {
        out << r.agent << "," << r.role << "," << r.action << ","
            << format_real(r.mean_incentive_received) << "," << r.count << "\n";
    }
    write_file(path, out.str());
}

void emit_run_outputs(const RunConfig& cfg, const RunResult& result, const std::string& dir) {
    fs::create_directories(dir);
    write_file(dir + "/episodes.csv", episodes_csv(result, cfg.n_agents));

    const auto names = action_names_for(cfg.env);
    std::ostringstream events;
    events << "agent,role,action,incentive_received\n";
    for (const auto& ev : result.probe_events) {
        events << ev.agent << "," << result.roles[static_cast<size_t>(ev.agent)] << ","
               << names[static_cast<size_t>(ev.action)] << "," << format_real(ev.incentive_received)
               << "\n";
    }
    write_file(dir + "/probe_events.csv", events.str());
    write_probe_csv(dir + "/probe.csv", incentive_probe(result.probe_events, result.roles, names));

    if (result.summary.success_defined) {
        std::vector<double> success;
        success.reserve(result.records.size());
        for (const auto& rec : result.records) success.push_back(rec.success);
        write_file(dir + "/chart_success_rate.svg",
                   svg_chart(rolling_mean(success, cfg.conv_window)));
    }
    for (int a = 0; a < cfg.n_agents; ++a) {
        std::vector<double> ret;
        ret.reserve(result.records.size());
        for (const auto& rec : result.records) ret.push_back(rec.total_return[static_cast<size_t>(a)]);
        write_file(dir + "/chart_total_return_" + std::to_string(a) + ".svg",
                   svg_chart(rolling_mean(ret, cfg.conv_window)));
    }
}

MultiResult run_many(const RunConfig& cfg, int n_seeds, int parallel, const std::string& out_dir,
                     bool keep_runs) {
    if (n_seeds < 1) throw ConfigError("need at least one seed");
    RunConfig base = cfg;
    base.validate();
    fs::create_directories(out_dir);
    write_file(out_dir + "/config_echo.txt", base.echo());

    MultiResult multi;
    multi.summaries.resize(static_cast<size_t>(n_seeds));
    multi.runs.resize(keep_runs ? static_cast<size_t>(n_seeds) : 0);

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= n_seeds || failed.load()) return;
            try {
                const std::uint64_t seed = base.seed + static_cast<std::uint64_t>(idx);
                RunResult res = run_experiment(base, seed);
                emit_run_outputs(base, res, out_dir + "/seed_" + std::to_string(seed));
                multi.summaries[static_cast<size_t>(idx)] = res.summary;
                if (keep_runs) multi.runs[static_cast<size_t>(idx)] = std::move(res);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                failed.store(true);
                if (error_message.empty()) error_message = e.what();
            }
        }
    };

    const int workers = std::clamp(parallel, 1, n_seeds);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failed.load()) throw ContractError("run failed: " + error_message);

    write_summary_csv(out_dir + "/summary.csv", multi.summaries);
    probe_from_dir(out_dir, out_dir + "/probe.csv");
    return multi;
}

void probe_from_dir(const std::string& dir, const std::string& out_path) {
    if (!fs::is_directory(dir)) throw ConfigError("'" + dir + "' is not a directory");
    std::vector<fs::path> seed_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0) {
            seed_dirs.push_back(entry.path());
        }
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());

    // (agent, role, action) -> (sum, count)
    std::map<std::tuple<int, std::string, std::string>, std::pair<double, long>> acc;
    for (const auto& sd : seed_dirs) {
        std::ifstream in(sd / "probe_events.csv");
        if (!in) continue;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string agent_s, role, action, value_s;
            if (!std::getline(row, agent_s, ',') || !std::getline(row, role, ',') ||
                !std::getline(row, action, ',') || !std::getline(row, value_s)) {
                continue;
            }
            auto& slot = acc[{std::stoi(agent_s), role, action}];
            slot.first += std::stod(value_s);
            slot.second += 1;
        }
    }
    std::vector<ProbeRow> rows;
    rows.reserve(acc.size());
    for (const auto& [key, sum_count] : acc) {
        ProbeRow row;
        row.agent = std::get<0>(key);
        row.role = std::get<1>(key);
        row.action = std::get<2>(key);
        row.count = sum_count.second;
        row.mean_incentive_received = sum_count.first / static_cast<double>(sum_count.second);
        rows.push_back(std::move(row));
    }
    write_probe_csv(out_path, rows);
}

}  // namespace arena

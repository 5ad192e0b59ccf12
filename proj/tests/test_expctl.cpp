#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "arena/expctl.hpp"

using namespace arena;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("arena_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny_config() {
    RunConfig cfg = preset_config("er2_lio");
    cfg.hp.batch = 1;  // one training + one evaluation episode per iteration
    cfg.episodes = 50;
    cfg.policy_hidden = 4;
    cfg.incentive_hidden = 4;
    cfg.conv_window = 10;
    cfg.validate();
    return cfg;
}

}  // namespace

TEST_CASE("config parsing: keys, comments, defaults") {
    const RunConfig cfg = parse_config_text(
        "# comment\n"
        "env = er\n"
        "n_agents = 2\n"
        "m_lever = 1\n"
        "beta = 0.2   # trailing comment\n"
        "agent.0.mode = lio\n"
        "agent.1.mode = pg\n");
    CHECK(cfg.env == "er");
    CHECK(cfg.hp.beta == 0.2);
    CHECK(cfg.hp.gamma == 0.99);  // untouched default
    REQUIRE(cfg.roster.size() == 2);
    CHECK(cfg.roster[0].mode == AgentMode::LioBenign);
    CHECK(cfg.roster[1].mode == AgentMode::PurePg);
}

TEST_CASE("config parsing: malformed input is rejected") {
    CHECK_THROWS_AS(parse_config_text("unknown_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("episodes ten\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("episodes = ten\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("agent.99.mode = lio\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("agent.0.volume = 11\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("env = chess\n"), ConfigError);
}

TEST_CASE("config validation: structural rules") {
    RunConfig cfg = parse_config_text("env = er\nn_agents = 2\nm_lever = 2\n");
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = parse_config_text("env = ipd\nn_agents = 3\n");
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    // Two adversaries are rejected.
    cfg = parse_config_text(
        "env = er\nn_agents = 3\nm_lever = 1\n"
        "agent.0.mode = lio\nagent.1.mode = bypass\nagent.2.mode = reverse\n");
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config validation: weak fake constant only warns") {
    RunConfig cfg = parse_config_text(
        "env = er\nn_agents = 2\nm_lever = 1\n"
        "agent.0.mode = lio\nagent.1.mode = fake_incentive\nagent.1.c_adv = 5\n");
    cfg.validate();
    REQUIRE(cfg.warnings.size() == 1);
    CHECK(cfg.warnings[0].find("c_adv") != std::string::npos);
    CHECK(cfg.echo().find("# warning:") != std::string::npos);
}

TEST_CASE("config echo: defaults are materialized") {
    const RunConfig cfg = parse_config_text("env = er\nn_agents = 2\nm_lever = 1\n");
    const std::string echo = cfg.echo();
    CHECK(echo.find("gamma = 0.98999999999999999") != std::string::npos);
    CHECK(echo.find("episodes = 30000") != std::string::npos);
    CHECK(echo.find("conv_window = 1000") != std::string::npos);
}

TEST_CASE("presets: all names build and validate") {
    const auto names = preset_names();
    CHECK(names.size() == 14);
    for (const auto& name : names) {
        const RunConfig cfg = preset_config(name);
        CHECK(cfg.preset == name);
        CHECK(cfg.roster.size() == static_cast<size_t>(cfg.n_agents));
    }
    CHECK_THROWS_AS(preset_config("er9_lio"), ConfigError);

    const RunConfig lio = preset_config("er2_lio");
    CHECK(lio.env == "er");
    CHECK(lio.n_agents == 2);
    CHECK(lio.m_lever == 1);
    CHECK(lio.roster[0].mode == AgentMode::LioBenign);
    CHECK(lio.roster[1].mode == AgentMode::LioBenign);

    const RunConfig fake = preset_config("er2_fake");
    CHECK(fake.roster[1].mode == AgentMode::FakeIncentive);
    CHECK(fake.roster[1].c_adv == 50.0);
}

TEST_CASE("convergence_episode: fixed cases and threshold monotonicity") {
    std::vector<double> series(200, 0.0);
    for (size_t e = 100; e < series.size(); ++e) series[e] = 1.0;
    auto conv = convergence_episode(series, 10, 0.95);
    REQUIRE(conv.has_value());
    CHECK(*conv == 109);

    CHECK_FALSE(convergence_episode(std::vector<double>(50, 0.0), 10, 0.95).has_value());

    conv = convergence_episode(std::vector<double>(20, 1.0), 5, 0.95);
    REQUIRE(conv.has_value());
    CHECK(*conv == 4);

    std::mt19937_64 rng(64);
    std::vector<double> noisy(400);
    for (double& v : noisy) v = rng() % 100 < 70 ? 1.0 : 0.0;
    long prev = -1;
    for (double th : {0.2, 0.4, 0.6, 0.8}) {
        const auto c = convergence_episode(noisy, 20, th);
        const long cur = c ? *c : static_cast<long>(noisy.size());
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("incentive_probe: aggregation by agent and action") {
    CHECK(incentive_probe({}, {}, action_names_for("er")).empty());

    std::vector<ProbeEvent> events{
        {0, 1, 1.0}, {0, 1, 2.0}, {0, 2, 0.0}, {1, 2, 0.5},
    };
    const auto rows = incentive_probe(events, {"lever", "door"}, action_names_for("er"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].agent == 0);
    CHECK(rows[0].role == "lever");
    CHECK(rows[0].action == "lever");
    CHECK(rows[0].mean_incentive_received == 1.5);
    CHECK(rows[0].count == 2);
    CHECK(rows[2].agent == 1);
    CHECK(rows[2].role == "door");
    CHECK(rows[2].action == "door");
}

TEST_CASE("run_experiment: zero episodes, empty summary") {
    RunConfig cfg = tiny_config();
    cfg.episodes = 0;
    const auto result = run_experiment(cfg, 3);
    CHECK(result.records.empty());
    CHECK(result.summary.convergence_episode == -1);
    CHECK(result.summary.final_success_rate == 0.0);
}

TEST_CASE("run_experiment: deterministic and metric shapes") {
    const RunConfig cfg = tiny_config();
    const auto a = run_experiment(cfg, 7);
    const auto b = run_experiment(cfg, 7);
    REQUIRE(a.records.size() == 25);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t e = 0; e < a.records.size(); ++e) {
        CHECK(a.records[e].env_return == b.records[e].env_return);
        CHECK(a.records[e].total_return == b.records[e].total_return);
        CHECK(a.records[e].inc_given == b.records[e].inc_given);
        CHECK(a.records[e].inc_recv == b.records[e].inc_recv);
        CHECK(a.records[e].success == b.records[e].success);
        CHECK((a.records[e].success == 0 || a.records[e].success == 1));
        CHECK(a.records[e].env_return.size() == 2);
    }
    CHECK(a.summary.seed == 7);

    // A different seed should give a different episode stream.
    const auto c = run_experiment(cfg, 8);
    bool any_diff = false;
    for (size_t e = 0; e < a.records.size(); ++e) {
        any_diff = any_diff || a.records[e].total_return != c.records[e].total_return;
    }
    CHECK(any_diff);
}

TEST_CASE("emit_run_outputs: schema headers and byte-identical re-emission") {
    const RunConfig cfg = tiny_config();
    const auto result = run_experiment(cfg, 4);
    TempDir dir("emit");
    emit_run_outputs(cfg, result, (dir.path / "run").string());
    const std::string episodes = slurp(dir.path / "run" / "episodes.csv");
    CHECK(episodes.rfind("episode,success,env_return_0,env_return_1,total_return_0,total_return_1,"
                         "inc_given_0,inc_given_1,inc_recv_0,inc_recv_1\n", 0) == 0);
    const std::string probe = slurp(dir.path / "run" / "probe.csv");
    CHECK(probe.rfind("agent,role,action,mean_incentive_received,count\n", 0) == 0);
    CHECK(fs::exists(dir.path / "run" / "probe_events.csv"));
    CHECK(fs::exists(dir.path / "run" / "chart_success_rate.svg"));
    CHECK(fs::exists(dir.path / "run" / "chart_total_return_0.svg"));
    CHECK(fs::exists(dir.path / "run" / "chart_total_return_1.svg"));

    emit_run_outputs(cfg, result, (dir.path / "run").string());
    CHECK(slurp(dir.path / "run" / "episodes.csv") == episodes);
    CHECK(slurp(dir.path / "run" / "probe.csv") == probe);
}

TEST_CASE("run_many: summaries, seed directories, parallel equals sequential") {
    RunConfig cfg = tiny_config();
    cfg.episodes = 12;
    TempDir seq("seq");
    TempDir par("par");
    const auto a = run_many(cfg, 3, 1, seq.path.string());
    const auto b = run_many(cfg, 3, 3, par.path.string());
    REQUIRE(a.summaries.size() == 3);
    CHECK(a.summaries[0].seed == cfg.seed);
    CHECK(a.summaries[2].seed == cfg.seed + 2);

    CHECK(slurp(seq.path / "summary.csv") == slurp(par.path / "summary.csv"));
    CHECK(slurp(seq.path / "probe.csv") == slurp(par.path / "probe.csv"));
    for (int s = 0; s < 3; ++s) {
        const std::string leaf = "seed_" + std::to_string(s);
        CHECK(slurp(seq.path / leaf / "episodes.csv") == slurp(par.path / leaf / "episodes.csv"));
    }

    const std::string summary = slurp(seq.path / "summary.csv");
    CHECK(summary.rfind("preset,seed,convergence_episode,final_success_rate,adversary_top_reward\n",
                        0) == 0);
    CHECK(fs::exists(seq.path / "config_echo.txt"));
}

TEST_CASE("probe_from_dir: re-aggregates stored events") {
    RunConfig cfg = tiny_config();
    cfg.episodes = 8;
    TempDir dir("probe");
    run_many(cfg, 2, 1, dir.path.string());
    const std::string before = slurp(dir.path / "probe.csv");
    fs::remove(dir.path / "probe.csv");
    probe_from_dir(dir.path.string(), (dir.path / "probe.csv").string());
    CHECK(slurp(dir.path / "probe.csv") == before);
    CHECK_THROWS_AS(probe_from_dir((dir.path / "missing").string(), "out.csv"), ConfigError);
}

TEST_CASE("ipd run: success columns blank, summary undefined") {
    RunConfig cfg = preset_config("ipd_lio");
    cfg.hp.batch = 1;
    cfg.episodes = 6;
    cfg.policy_hidden = 4;
    cfg.incentive_hidden = 4;
    cfg.validate();
    const auto result = run_experiment(cfg, 1);
    for (const auto& rec : result.records) CHECK(rec.success == -1);
    CHECK_FALSE(result.summary.success_defined);
    CHECK(result.roles == std::vector<std::string>{"na", "na"});

    TempDir dir("ipd");
    emit_run_outputs(cfg, result, dir.path.string());
    const std::string episodes = slurp(dir.path / "episodes.csv");
    // Blank success cell: "0,," at the start of the first data row.
    CHECK(episodes.find("\n0,,") != std::string::npos);
}

TEST_CASE("format_real: 17 significant digits round-trip") {
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(format_real(1.0) == "1");
    const double v = 0.1 + 0.2;
    CHECK(std::stod(format_real(v)) == v);
}

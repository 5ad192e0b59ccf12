#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <random>
#include <tuple>

#include "arena/agents.hpp"

using namespace arena;

TEST_CASE("mode names round-trip") {
    for (AgentMode m : {AgentMode::LioBenign, AgentMode::PurePg, AgentMode::PartialComm,
                        AgentMode::FakeIncentive, AgentMode::Bypass, AgentMode::Reverse}) {
        CHECK(mode_from_name(mode_name(m)) == m);
    }
    CHECK_THROWS_AS(mode_from_name("nope"), ConfigError);
    CHECK_FALSE(is_adversarial(AgentMode::LioBenign));
    CHECK_FALSE(is_adversarial(AgentMode::PurePg));
    CHECK(is_adversarial(AgentMode::PartialComm));
    CHECK(is_adversarial(AgentMode::FakeIncentive));
    CHECK(is_adversarial(AgentMode::Bypass));
    CHECK(is_adversarial(AgentMode::Reverse));
}

TEST_CASE("channel and training flags per mode") {
    const Mlp policy(3, 4, 3);
    auto flags = [&](AgentMode m) {
        Agent a(0, m, policy);
        return std::tuple{a.gives_learned_channel(), a.gives_constant_channel(), a.trains_policy(),
                          a.learns_from_incentives()};
    };
    CHECK(flags(AgentMode::LioBenign) == std::tuple{true, false, true, true});
    CHECK(flags(AgentMode::PurePg) == std::tuple{false, false, true, true});
    CHECK(flags(AgentMode::PartialComm) == std::tuple{true, false, true, false});
    CHECK(flags(AgentMode::FakeIncentive) == std::tuple{false, true, true, false});
    CHECK(flags(AgentMode::Bypass) == std::tuple{false, false, false, true});
    CHECK(flags(AgentMode::Reverse) == std::tuple{true, false, true, true});
}

TEST_CASE("select_action: uniform logits sample uniformly (chi-squared)") {
    const Mlp policy(2, 4, 3);
    Agent agent(0, AgentMode::LioBenign, policy);  // zero params -> uniform logits
    std::mt19937_64 rng(2024);
    const std::vector<double> obs{1.0, 0.0};
    const int draws = 100000;
    std::array<long, 3> counts{0, 0, 0};
    for (int i = 0; i < draws; ++i) {
        const int a = select_action(agent, obs, 0, rng);
        REQUIRE(a >= 0);
        REQUIRE(a < 3);
        counts[static_cast<size_t>(a)] += 1;
    }
    const double expected = draws / 3.0;
    double chi2 = 0.0;
    for (long c : counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    // 2 degrees of freedom, alpha = 0.01 critical value.
    CHECK(chi2 < 9.21);
}

TEST_CASE("select_action: bypass always plays the no-op") {
    const Mlp policy(2, 4, 3);
    Agent agent(0, AgentMode::Bypass, policy);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        CHECK(select_action(agent, std::vector<double>{1.0, 0.0}, 2, rng) == 2);
    }
}

TEST_CASE("select_action: sharp logits are near-deterministic") {
    const Mlp policy(2, 4, 3);
    Agent agent(0, AgentMode::LioBenign, policy);
    // Zero weights; output biases set the logits to [10, -10, -10].
    const auto& b2 = agent.policy_params.segments.back();
    REQUIRE(b2.name == "b2");
    agent.policy_params.values[b2.offset + 0] = 10.0;
    agent.policy_params.values[b2.offset + 1] = -10.0;
    agent.policy_params.values[b2.offset + 2] = -10.0;

    std::mt19937_64 rng(7);
    const int draws = 100000;
    long hits = 0;
    for (int i = 0; i < draws; ++i) {
        if (select_action(agent, std::vector<double>{0.0, 0.0}, 0, rng) == 0) ++hits;
    }
    CHECK(static_cast<double>(hits) / draws > 0.999);
}

TEST_CASE("assemble_total_reward: mode-dependent composition") {
    const Mlp policy(2, 2, 2);
    Agent benign(0, AgentMode::LioBenign, policy);
    Agent partial(0, AgentMode::PartialComm, policy);
    Agent fake(0, AgentMode::FakeIncentive, policy);

    CHECK(assemble_total_reward(benign, -1.0, std::vector<double>{1.0}) == 0.0);
    CHECK(assemble_total_reward(partial, -1.0, std::vector<double>{1.0}) == -1.0);
    CHECK(assemble_total_reward(fake, -1.0, std::vector<double>{1.0}) == -1.0);
    // Benign recipient of a 0.5 gift plus a 50 constant: exact termwise sum.
    CHECK(assemble_total_reward(benign, -1.0, std::vector<double>{0.5, 50.0}) == 49.5);
}

TEST_CASE("assemble_total_reward: partial comm ignores any incoming gifts") {
    const Mlp policy(2, 2, 2);
    Agent partial(0, AgentMode::PartialComm, policy);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> gd(0.0, 3.0);
    for (int rep = 0; rep < 100; ++rep) {
        const double env = gd(rng) - 1.5;
        std::vector<double> a{gd(rng), gd(rng)};
        std::vector<double> b{gd(rng)};
        CHECK(assemble_total_reward(partial, env, a) == assemble_total_reward(partial, env, b));
        CHECK(assemble_total_reward(partial, env, a) == env);
    }
}

TEST_CASE("assemble_total_reward: benign equals independent summation") {
    const Mlp policy(2, 2, 2);
    Agent benign(0, AgentMode::LioBenign, policy);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> gd(-2.0, 2.0);
    for (int rep = 0; rep < 100; ++rep) {
        const double env = gd(rng);
        std::vector<double> incoming(1 + rng() % 4);
        for (double& v : incoming) v = gd(rng);
        double want = env;
        for (double v : incoming) want += v;
        CHECK(assemble_total_reward(benign, env, incoming) == want);
    }
}

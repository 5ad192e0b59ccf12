#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>

#include "arena/envs.hpp"
#include "arena/incentive.hpp"

namespace arena {

enum class AgentMode {
    LioBenign,      // learns policy on total reward, learns a gift channel
    PurePg,         // plain REINFORCE recipient, gives nothing
    PartialComm,    // discards incoming gifts, still gives a learned channel
    FakeIncentive,  // constant C^Adv channel, policy trained on env reward only
    Bypass,         // never acts, never learns, gives nothing
    Reverse         // benign reception/giving, policy gradient sign flipped
};

const char* mode_name(AgentMode mode);
AgentMode mode_from_name(const std::string& name);
bool is_adversarial(AgentMode mode);

struct Agent {
    int index = 0;
    AgentMode mode = AgentMode::LioBenign;
    double c_adv = 0.0;       // FakeIncentive only
    double explore_eps = 0.0;  // probability of a uniform-random action

    Mlp policy_net;
    ParamVector policy_params;
    std::optional<IncentiveFunction> incentive;

    Agent(int index, AgentMode mode, const Mlp& policy)
        : index(index), mode(mode), policy_net(policy), policy_params(policy.make_params()) {}

    bool gives_learned_channel() const {
        return mode == AgentMode::LioBenign || mode == AgentMode::PartialComm ||
               mode == AgentMode::Reverse;
    }
    bool gives_constant_channel() const { return mode == AgentMode::FakeIncentive; }
    bool trains_policy() const { return mode != AgentMode::Bypass; }
    // Whether incoming gifts enter this agent's training returns.
    bool learns_from_incentives() const {
        return mode == AgentMode::LioBenign || mode == AgentMode::PurePg ||
               mode == AgentMode::Bypass || mode == AgentMode::Reverse;
    }
};

// Samples from softmax(policy logits), mixed with a uniform distribution at
// rate explore_eps; a Bypass agent deterministically plays the environment's
// no-op.
int select_action(const Agent& agent, std::span<const double> obs, int noop_action,
                  std::mt19937_64& rng);

// Composite per-step reward for training and reporting: env reward plus
// incoming gifts, except PartialComm/FakeIncentive which keep env only.
double assemble_total_reward(const Agent& recipient, double env_reward,
                             std::span<const double> incoming);

}  // namespace arena

#include "arena/agents.hpp"

namespace arena {

const char* mode_name(AgentMode mode) {
    switch (mode) {
        case AgentMode::LioBenign: return "lio";
        case AgentMode::PurePg: return "pg";
        case AgentMode::PartialComm: return "partial_comm";
        case AgentMode::FakeIncentive: return "fake_incentive";
        case AgentMode::Bypass: return "bypass";
        case AgentMode::Reverse: return "reverse";
    }
    return "?";
}

AgentMode mode_from_name(const std::string& name) {
    if (name == "lio") return AgentMode::LioBenign;
    if (name == "pg") return AgentMode::PurePg;
    if (name == "partial_comm") return AgentMode::PartialComm;
    if (name == "fake_incentive") return AgentMode::FakeIncentive;
    if (name == "bypass") return AgentMode::Bypass;
    if (name == "reverse") return AgentMode::Reverse;
    throw ConfigError("unknown agent mode '" + name + "'");
}

bool is_adversarial(AgentMode mode) {
    return mode == AgentMode::PartialComm || mode == AgentMode::FakeIncentive ||
           mode == AgentMode::Bypass || mode == AgentMode::Reverse;
}

int select_action(const Agent& agent, std::span<const double> obs, int noop_action,
                  std::mt19937_64& rng) {
    if (agent.mode == AgentMode::Bypass) return noop_action;
    const auto logits = agent.policy_net.forward(agent.policy_params.values, obs);
    auto probs = softmax(logits);
    if (agent.explore_eps > 0.0) {
        const double mix = agent.explore_eps / static_cast<double>(probs.size());
        for (double& p : probs) p = (1.0 - agent.explore_eps) * p + mix;
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    return sample_categorical(probs, uniform(rng));
}

double assemble_total_reward(const Agent& recipient, double env_reward,
                             std::span<const double> incoming) {
    if (recipient.mode == AgentMode::PartialComm || recipient.mode == AgentMode::FakeIncentive) {
        return env_reward;
    }
    double total = env_reward;
    for (double r : incoming) total += r;
    return total;
}

}  // namespace arena

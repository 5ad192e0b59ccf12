#include "arena/envs.hpp"

#include <string>

namespace arena {

EscapeRoom::EscapeRoom(int n_agents, int m_lever, int max_steps)
    : n_(n_agents), m_(m_lever), max_steps_(max_steps) {
    if (n_agents < 2) throw ConfigError("EscapeRoom: need at least 2 agents");
    if (m_lever < 1 || m_lever >= n_agents) {
        throw ConfigError("EscapeRoom: requires 1 <= M < N, got M=" + std::to_string(m_lever) +
                          ", N=" + std::to_string(n_agents));
    }
    if (max_steps < 1) throw ConfigError("EscapeRoom: max_steps must be >= 1");
    reset();
}

void EscapeRoom::reset() {
    positions_.assign(static_cast<size_t>(n_), Start);
    step_index_ = 0;
    terminated_ = false;
    exited_ = false;
}

std::vector<double> EscapeRoom::observe(int agent) const {
    if (agent < 0 || agent >= n_) throw ContractError("EscapeRoom::observe: bad agent index");
    std::vector<double> obs(static_cast<size_t>(3 * n_), 0.0);
    obs[static_cast<size_t>(positions_[static_cast<size_t>(agent)])] = 1.0;
    size_t off = 3;
    for (int other = 0; other < n_; ++other) {
        if (other == agent) continue;
        obs[off + static_cast<size_t>(positions_[static_cast<size_t>(other)])] = 1.0;
        off += 3;
    }
    return obs;
}

StepOutcome EscapeRoom::step(std::span<const int> actions) {
    if (terminated_) throw ContractError("EscapeRoom::step called after termination");
    if (actions.size() != static_cast<size_t>(n_)) {
        throw ContractError("EscapeRoom::step: expected one action per agent");
    }
    StepOutcome out;
    out.env_rewards.assign(static_cast<size_t>(n_), 0.0);

    for (int a = 0; a < n_; ++a) {
        const int target = actions[static_cast<size_t>(a)];
        if (target < 0 || target > 2) throw ContractError("EscapeRoom::step: bad action");
        if (target != positions_[static_cast<size_t>(a)]) {
            out.env_rewards[static_cast<size_t>(a)] -= 1.0;
            positions_[static_cast<size_t>(a)] = target;
        }
    }
    int at_lever = 0;
    for (int a = 0; a < n_; ++a) {
        if (positions_[static_cast<size_t>(a)] == Lever) ++at_lever;
    }
    const bool door_open = at_lever >= m_;
    if (door_open) {
        for (int a = 0; a < n_; ++a) {
            // Any agent whose chosen target is the door exits while it is
            // open, whether it stepped in this turn or was already waiting.
            if (actions[static_cast<size_t>(a)] == Door) {
                out.env_rewards[static_cast<size_t>(a)] += 10.0;
                exited_ = true;
            }
        }
    }
    ++step_index_;
    if (exited_ || step_index_ >= max_steps_) terminated_ = true;

    out.done = terminated_;
    out.obs.reserve(static_cast<size_t>(n_));
    for (int a = 0; a < n_; ++a) out.obs.push_back(observe(a));
    return out;
}

IteratedPd::IteratedPd(int episode_length) : episode_length_(episode_length) {
    if (episode_length < 1) throw ConfigError("IteratedPd: episode_length must be >= 1");
    reset();
}

void IteratedPd::reset() {
    round_ = 0;
    last_a0_ = -1;
    last_a1_ = -1;
}

std::pair<double, double> IteratedPd::payoff(int a0, int a1) {
    if (a0 == Cooperate && a1 == Cooperate) return {-1.0, -1.0};
    if (a0 == Cooperate && a1 == Defect) return {-3.0, 0.0};
    if (a0 == Defect && a1 == Cooperate) return {0.0, -3.0};
    return {-2.0, -2.0};
}

std::vector<double> IteratedPd::observe(int agent) const {
    if (agent != 0 && agent != 1) throw ContractError("IteratedPd::observe: bad agent index");
    std::vector<double> obs(5, 0.0);
    if (last_a0_ < 0) {
        obs[0] = 1.0;
        return obs;
    }
    const int own = agent == 0 ? last_a0_ : last_a1_;
    const int other = agent == 0 ? last_a1_ : last_a0_;
    obs[static_cast<size_t>(1 + own * 2 + other)] = 1.0;
    return obs;
}

StepOutcome IteratedPd::step(std::span<const int> actions) {
    if (done()) throw ContractError("IteratedPd::step called after termination");
    if (actions.size() != 2) throw ContractError("IteratedPd::step: expected 2 actions");
    const int a0 = actions[0], a1 = actions[1];
    if (a0 < 0 || a0 > 1 || a1 < 0 || a1 > 1) throw ContractError("IteratedPd::step: bad action");

    auto [r0, r1] = payoff(a0, a1);
    last_a0_ = a0;
    last_a1_ = a1;
    ++round_;

    StepOutcome out;
    out.env_rewards = {r0, r1};
    out.done = done();
    out.obs = {observe(0), observe(1)};
    return out;
}

}  // namespace arena

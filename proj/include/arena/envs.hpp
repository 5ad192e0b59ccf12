#pragma once

#include <memory>
#include <span>
#include <vector>

#include "arena/diffcore.hpp"

namespace arena {

struct StepOutcome {
    std::vector<std::vector<double>> obs;  // per agent, post-transition
    std::vector<double> env_rewards;       // per agent
    bool done = false;
};

// Pure, seeded-free transition functions. All randomness lives in the policies.
class Env {
public:
    virtual ~Env() = default;
    virtual void reset() = 0;
    virtual int n_agents() const = 0;
    virtual int action_count() const = 0;
    virtual int obs_size() const = 0;
    virtual std::vector<double> observe(int agent) const = 0;
    virtual StepOutcome step(std::span<const int> actions) = 0;
    virtual bool done() const = 0;
    // Episode counts as a success (ER exit). IPD has no success notion.
    virtual bool success() const = 0;
    virtual bool success_defined() const = 0;
    // The action that leaves the acting agent where it is.
    virtual int noop_action(int agent) const = 0;
    virtual double max_env_reward() const = 0;
};

// Escape Room ER(N, M): door opens when at least M agents occupy the lever
// after simultaneous movement; exiting through an open door pays +10, any
// movement costs -1. Exit requires stepping into the door that turn, so every
// exit nets +9.
class EscapeRoom final : public Env {
public:
    enum Pos : int { Start = 0, Lever = 1, Door = 2 };

    EscapeRoom(int n_agents, int m_lever, int max_steps);

    void reset() override;
    int n_agents() const override { return n_; }
    int action_count() const override { return 3; }
    int obs_size() const override { return 3 * n_; }
    std::vector<double> observe(int agent) const override;
    StepOutcome step(std::span<const int> actions) override;
    bool done() const override { return terminated_; }
    bool success() const override { return exited_; }
    bool success_defined() const override { return true; }
    int noop_action(int agent) const override { return positions_[static_cast<size_t>(agent)]; }
    double max_env_reward() const override { return 10.0; }

    int position(int agent) const { return positions_[static_cast<size_t>(agent)]; }
    int step_index() const { return step_index_; }

private:
    int n_, m_, max_steps_;
    std::vector<int> positions_;
    int step_index_ = 0;
    bool terminated_ = false;
    bool exited_ = false;
};

// Memory-1 iterated prisoner's dilemma over a fixed number of rounds. Each
// agent observes a one-hot over {initial, CC, CD, DC, DD}, own action first.
class IteratedPd final : public Env {
public:
    enum Action : int { Cooperate = 0, Defect = 1 };

    explicit IteratedPd(int episode_length);

    void reset() override;
    int n_agents() const override { return 2; }
    int action_count() const override { return 2; }
    int obs_size() const override { return 5; }
    std::vector<double> observe(int agent) const override;
    StepOutcome step(std::span<const int> actions) override;
    bool done() const override { return round_ >= episode_length_; }
    bool success() const override { return false; }
    bool success_defined() const override { return false; }
    int noop_action(int) const override { return Cooperate; }
    double max_env_reward() const override { return 0.0; }

    // Reward pair for a joint action, agent 0 first.
    static std::pair<double, double> payoff(int a0, int a1);

private:
    int episode_length_;
    int round_ = 0;
    int last_a0_ = -1, last_a1_ = -1;  // -1 encodes the initial symbol
};

}  // namespace arena

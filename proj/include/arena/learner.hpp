#pragma once

#include <random>
#include <span>
#include <vector>

#include "arena/agents.hpp"

namespace arena {

struct TrajStep {
    std::vector<std::vector<double>> obs;  // per agent, before acting
    std::vector<int> actions;
    std::vector<double> env_rewards;
    IncentiveMatrix incentives;
};

struct Trajectory {
    std::vector<TrajStep> steps;
    bool success = false;
};

struct Hyperparams {
    double gamma = 0.99;
    double beta = 0.1;
    double alpha = 0.1;
    double eta_lr = 0.01;
    int batch = 1;

    void validate() const;
};

// Discounted returns-to-go, G_t = r_t + gamma * G_{t+1}.
std::vector<double> returns(std::span<const double> rewards, double gamma);

// Runs one episode. Gift channels are evaluated numerically at each step and
// recorded in the step's IncentiveMatrix. theta_override, when given, supplies
// per-agent policy parameters to act with instead of the agents' own.
Trajectory generate_trajectory(Env& env, const std::vector<Agent>& agents, std::mt19937_64& rng,
                               const std::vector<std::vector<double>>* theta_override = nullptr);

// Gradient of log pi(action | obs) with respect to the policy parameters,
// computed through a scratch tape.
std::vector<double> logp_grad(const Mlp& net, std::span<const double> params,
                              std::span<const double> obs, int action, Tape& scratch);

// Mode-aware per-step training rewards for one agent along a trajectory.
std::vector<double> training_rewards(const Agent& agent, const Trajectory& traj);

// REINFORCE step: beta * sum_t grad log pi(a_t|o_t) * G_t, G from the agent's
// mode-aware rewards. The Reverse update is the exact negation of this delta.
std::vector<double> policy_update_delta(const Agent& agent, const Trajectory& traj,
                                        const Hyperparams& hp);

// One recorded inner update: incentive channels re-run on-tape over the old
// trajectories, every eta-dependent theta-hat composed on the same tape.
struct InnerUpdates {
    Tape tape;
    std::vector<std::vector<VarId>> eta_leaves;          // per agent (learned givers only)
    std::vector<std::vector<VarId>> theta_hat_vars;      // per agent; empty when off-tape
    std::vector<std::vector<double>> theta_hat_values;   // per agent, always set
    std::vector<std::vector<double>> theta_delta_values; // per agent: theta_hat - theta, pre-add
    std::vector<VarId> gift_cost_vars;                   // per agent; -1 unless learned giver

    // log pi-hat nodes on the new trajectories, built on first hypergradient
    // call: [batch][agent][step]
    std::vector<std::vector<std::vector<VarId>>> logp_new;
    bool logp_new_built = false;
};

InnerUpdates record_inner_updates(const std::vector<Agent>& agents,
                                  std::span<const Trajectory> old_trajs, const Hyperparams& hp);

// d/d eta^giver of  E_new[ sum_t gamma^t env reward of giver ] - alpha * L,
// the first term flowing through every recipient's recorded theta-hat.
std::vector<double> incentive_hypergradient(InnerUpdates& inner, int giver,
                                            const std::vector<Agent>& agents,
                                            std::span<const Trajectory> new_trajs,
                                            const Hyperparams& hp);

struct IterationMetrics {
    bool success = false;        // first training trajectory
    double success_rate = 0.0;   // mean over the training batch
    std::vector<double> env_return;
    std::vector<double> total_return;
    std::vector<double> inc_given;
    std::vector<double> inc_received;
};

// One full iteration: training batch, inner policy updates, fresh batch,
// incentive ascent, commit. Per-agent metrics are means over the training
// batch. first_traj, when given, receives the first training trajectory
// (for metrics probes).
IterationMetrics lio_iteration(Env& env, std::vector<Agent>& agents, const Hyperparams& hp,
                               std::mt19937_64& rng, Trajectory* first_traj = nullptr);

IterationMetrics trajectory_metrics(const std::vector<Agent>& agents, const Trajectory& traj);

}  // namespace arena

#pragma once

#include <span>
#include <vector>

#include "arena/diffcore.hpp"

namespace arena {

// Per-step matrix of gifts: entry (giver, recipient). Diagonal stays zero.
struct IncentiveMatrix {
    int n = 0;
    std::vector<double> v;

    explicit IncentiveMatrix(int n_agents = 0)
        : n(n_agents), v(static_cast<size_t>(n_agents) * n_agents, 0.0) {}

    double at(int giver, int recipient) const {
        return v[static_cast<size_t>(giver) * n + recipient];
    }
    void set(int giver, int recipient, double value) {
        if (giver == recipient) throw ContractError("IncentiveMatrix: diagonal must stay zero");
        v[static_cast<size_t>(giver) * n + recipient] = value;
    }
    double given_by(int giver) const {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += at(giver, j);
        return s;
    }
    double received_by(int recipient) const {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += at(i, recipient);
        return s;
    }
};

// One step's inputs to a giver's incentive net.
struct IncentiveInputs {
    std::vector<double> obs;          // giver's observation
    std::vector<int> actions_others;  // other agents' actions, index order
};

// Learnable gift channel r_eta: maps (own observation, others' actions) to a
// bounded non-negative payment per recipient.
class IncentiveFunction {
public:
    IncentiveFunction(int obs_size, int n_others, int action_count, int hidden, double r_max);

    int n_others() const { return n_others_; }
    double r_max() const { return r_max_; }
    const Mlp& net() const { return net_; }
    ParamVector& params() { return params_; }
    const ParamVector& params() const { return params_; }

    void init_random(std::mt19937_64& rng, double stddev, double output_bias);

    std::vector<double> compute(std::span<const double> obs,
                                std::span<const int> actions_others) const;
    std::vector<VarId> compute_tape(Tape& tape, std::span<const VarId> param_vars,
                                    std::span<const double> obs,
                                    std::span<const int> actions_others) const;

private:
    std::vector<double> encode_input(std::span<const double> obs,
                                     std::span<const int> actions_others) const;
    int obs_size_, n_others_, action_count_;
    double r_max_;
    Mlp net_;
    ParamVector params_;
};

// Discounted L1 cost of the gifts emitted along a trajectory's inputs.
double gift_cost(const IncentiveFunction& f, std::span<const IncentiveInputs> steps,
                 double gamma);
VarId gift_cost_tape(Tape& tape, const IncentiveFunction& f,
                     std::span<const VarId> param_vars,
                     std::span<const IncentiveInputs> steps, double gamma);

// Eq.-style dominance requirement on the fake constant channel: the constant
// must drown both the environment and the benign channels.
bool fake_incentive_dominates(double c_adv, double max_env_reward, double r_max);

}  // namespace arena

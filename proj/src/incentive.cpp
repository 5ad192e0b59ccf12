#include "arena/incentive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace arena {

IncentiveFunction::IncentiveFunction(int obs_size, int n_others, int action_count, int hidden,
                                     double r_max)
    : obs_size_(obs_size),
      n_others_(n_others),
      action_count_(action_count),
      r_max_(r_max),
      net_(obs_size + n_others * action_count, hidden, n_others,
           OutputActivation::BoundedSigmoid, r_max),
      params_(net_.make_params()) {
    if (n_others < 1) throw ConfigError("IncentiveFunction: needs at least one recipient");
    if (r_max <= 0.0) throw ConfigError("IncentiveFunction: r_max must be positive");
}

void IncentiveFunction::init_random(std::mt19937_64& rng, double stddev, double output_bias) {
    params_ = net_.random_params(rng, stddev);
    // Output bias segment is the last one; a negative start keeps early gifts small.
    const auto& seg = params_.segments.back();
    for (size_t k = 0; k < seg.extent; ++k) params_.values[seg.offset + k] = output_bias;
}

std::vector<double> IncentiveFunction::encode_input(std::span<const double> obs,
                                                    std::span<const int> actions_others) const {
    if (obs.size() != static_cast<size_t>(obs_size_)) {
        throw ConfigError("IncentiveFunction: observation length mismatch");
    }
    if (actions_others.size() != static_cast<size_t>(n_others_)) {
        throw ConfigError("IncentiveFunction: expected " + std::to_string(n_others_) +
                          " other-agent actions");
    }
    std::vector<double> input(static_cast<size_t>(obs_size_ + n_others_ * action_count_), 0.0);
    std::copy(obs.begin(), obs.end(), input.begin());
    for (int k = 0; k < n_others_; ++k) {
        const int a = actions_others[static_cast<size_t>(k)];
        if (a < 0 || a >= action_count_) {
            throw ContractError("IncentiveFunction: action index out of range");
        }
        input[static_cast<size_t>(obs_size_ + k * action_count_ + a)] = 1.0;
    }
    return input;
}

std::vector<double> IncentiveFunction::compute(std::span<const double> obs,
                                               std::span<const int> actions_others) const {
    return net_.forward(params_.values, encode_input(obs, actions_others));
}

std::vector<VarId> IncentiveFunction::compute_tape(Tape& tape, std::span<const VarId> param_vars,
                                                   std::span<const double> obs,
                                                   std::span<const int> actions_others) const {
    return net_.forward_tape(tape, param_vars, encode_input(obs, actions_others));
}

double gift_cost(const IncentiveFunction& f, std::span<const IncentiveInputs> steps,
                 double gamma) {
    double total = 0.0;
    double discount = 1.0;
    for (const auto& s : steps) {
        for (double r : f.compute(s.obs, s.actions_others)) total += discount * std::abs(r);
        discount *= gamma;
    }
    return total;
}

VarId gift_cost_tape(Tape& tape, const IncentiveFunction& f, std::span<const VarId> param_vars,
                     std::span<const IncentiveInputs> steps, double gamma) {
    VarId total = tape.constant(0.0);
    double discount = 1.0;
    for (const auto& s : steps) {
        for (VarId r : f.compute_tape(tape, param_vars, s.obs, s.actions_others)) {
            total = tape.fma_const(discount, total, tape.abs_(r));
        }
        discount *= gamma;
    }
    return total;
}

bool fake_incentive_dominates(double c_adv, double max_env_reward, double r_max) {
    return c_adv > max_env_reward && c_adv > r_max;
}

}  // namespace arena

#include "arena/learner.hpp"

#include <cmath>

namespace arena {
namespace {

// Recipients of giver i, in agent-index order; slot k of the incentive net
// output maps to recipients()[k].
std::vector<int> recipients_of(int giver, int n) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(n - 1));
    for (int j = 0; j < n; ++j) {
        if (j != giver) out.push_back(j);
    }
    return out;
}

int output_slot(int giver, int recipient) {
    return recipient < giver ? recipient : recipient - 1;
}

std::vector<int> actions_without(std::span<const int> actions, int agent) {
    std::vector<int> out;
    out.reserve(actions.size() - 1);
    for (size_t k = 0; k < actions.size(); ++k) {
        if (static_cast<int>(k) != agent) out.push_back(actions[k]);
    }
    return out;
}

std::vector<IncentiveInputs> giver_inputs(const Trajectory& traj, int giver) {
    std::vector<IncentiveInputs> steps;
    steps.reserve(traj.steps.size());
    for (const auto& s : traj.steps) {
        steps.push_back({s.obs[static_cast<size_t>(giver)],
                         actions_without(s.actions, giver)});
    }
    return steps;
}

}  // namespace

void Hyperparams::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(eta_lr >= 0.0)) throw ConfigError("eta_lr must be >= 0");
    if (batch < 1) throw ConfigError("batch must be >= 1");
}

std::vector<double> returns(std::span<const double> rewards, double gamma) {
    std::vector<double> g(rewards.size(), 0.0);
    double acc = 0.0;
    for (size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + gamma * acc;
        g[t] = acc;
    }
    return g;
}

Trajectory generate_trajectory(Env& env, const std::vector<Agent>& agents, std::mt19937_64& rng,
                               const std::vector<std::vector<double>>* theta_override) {
    const int n = env.n_agents();
    if (static_cast<int>(agents.size()) != n) {
        throw ConfigError("generate_trajectory: roster size does not match environment");
    }
    env.reset();
    Trajectory traj;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    while (!env.done()) {
        TrajStep step;
        step.incentives = IncentiveMatrix(n);
        step.obs.reserve(static_cast<size_t>(n));
        for (int a = 0; a < n; ++a) step.obs.push_back(env.observe(a));

        step.actions.resize(static_cast<size_t>(n));
        for (int a = 0; a < n; ++a) {
            const Agent& agent = agents[static_cast<size_t>(a)];
            if (agent.mode == AgentMode::Bypass) {
                step.actions[static_cast<size_t>(a)] = env.noop_action(a);
                continue;
            }
            std::span<const double> params =
                theta_override ? std::span<const double>((*theta_override)[static_cast<size_t>(a)])
                               : std::span<const double>(agent.policy_params.values);
            auto probs =
                softmax(agent.policy_net.forward(params, step.obs[static_cast<size_t>(a)]));
            if (agent.explore_eps > 0.0) {
                const double mix = agent.explore_eps / static_cast<double>(probs.size());
                for (double& p : probs) p = (1.0 - agent.explore_eps) * p + mix;
            }
            step.actions[static_cast<size_t>(a)] = sample_categorical(probs, uniform(rng));
        }

        for (int i = 0; i < n; ++i) {
            const Agent& giver = agents[static_cast<size_t>(i)];
            if (giver.gives_learned_channel()) {
                const auto others = actions_without(step.actions, i);
                const auto gifts = giver.incentive->compute(step.obs[static_cast<size_t>(i)], others);
                const auto recips = recipients_of(i, n);
                for (size_t k = 0; k < recips.size(); ++k) {
                    step.incentives.set(i, recips[k], gifts[k]);
                }
            } else if (giver.gives_constant_channel()) {
                for (int j = 0; j < n; ++j) {
                    if (j != i) step.incentives.set(i, j, giver.c_adv);
                }
            }
        }

        const StepOutcome outcome = env.step(step.actions);
        step.env_rewards = outcome.env_rewards;
        traj.steps.push_back(std::move(step));
    }
    traj.success = env.success();
    return traj;
}

std::vector<double> logp_grad(const Mlp& net, std::span<const double> params,
                              std::span<const double> obs, int action, Tape& scratch) {
    scratch.clear();
    std::vector<VarId> leaves(params.size());
    for (size_t k = 0; k < params.size(); ++k) leaves[k] = scratch.leaf(params[k]);
    const auto logits = net.forward_tape(scratch, leaves, obs);
    const VarId lp = log_prob_tape(scratch, logits, action);
    const auto adj = scratch.backward(lp);
    std::vector<double> grad(params.size());
    for (size_t k = 0; k < params.size(); ++k) grad[k] = adj[static_cast<size_t>(leaves[k])];
    return grad;
}

std::vector<double> training_rewards(const Agent& agent, const Trajectory& traj) {
    std::vector<double> rewards;
    rewards.reserve(traj.steps.size());
    for (const auto& s : traj.steps) {
        std::vector<double> incoming;
        incoming.reserve(s.incentives.n > 0 ? static_cast<size_t>(s.incentives.n - 1) : 0);
        for (int i = 0; i < s.incentives.n; ++i) {
            if (i != agent.index) incoming.push_back(s.incentives.at(i, agent.index));
        }
        rewards.push_back(assemble_total_reward(
            agent, s.env_rewards[static_cast<size_t>(agent.index)], incoming));
    }
    return rewards;
}

std::vector<double> policy_update_delta(const Agent& agent, const Trajectory& traj,
                                        const Hyperparams& hp) {
    if (traj.steps.empty()) throw ContractError("policy_update_delta: empty trajectory");
    const auto rewards = training_rewards(agent, traj);
    const auto g = returns(rewards, hp.gamma);
    std::vector<double> delta(agent.policy_params.size(), 0.0);
    Tape scratch;
    for (size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& s = traj.steps[t];
        const auto grad = logp_grad(agent.policy_net, agent.policy_params.values,
                                    s.obs[static_cast<size_t>(agent.index)],
                                    s.actions[static_cast<size_t>(agent.index)], scratch);
        for (size_t k = 0; k < delta.size(); ++k) delta[k] += hp.beta * grad[k] * g[t];
    }
    return delta;
}

InnerUpdates record_inner_updates(const std::vector<Agent>& agents,
                                  std::span<const Trajectory> old_trajs, const Hyperparams& hp) {
    const int n = static_cast<int>(agents.size());
    const int batch = static_cast<int>(old_trajs.size());
    if (batch == 0) throw ContractError("record_inner_updates: no trajectories");

    InnerUpdates inner;
    inner.eta_leaves.resize(static_cast<size_t>(n));
    inner.theta_hat_vars.resize(static_cast<size_t>(n));
    inner.theta_hat_values.resize(static_cast<size_t>(n));
    inner.theta_delta_values.resize(static_cast<size_t>(n));
    inner.gift_cost_vars.assign(static_cast<size_t>(n), -1);
    Tape& tape = inner.tape;

    int learned_givers = 0;
    for (const Agent& a : agents) {
        if (a.gives_learned_channel()) ++learned_givers;
    }

    // Eta leaves.
    for (int i = 0; i < n; ++i) {
        const Agent& a = agents[static_cast<size_t>(i)];
        if (!a.gives_learned_channel()) continue;
        auto& leaves = inner.eta_leaves[static_cast<size_t>(i)];
        leaves.resize(a.incentive->params().size());
        for (size_t k = 0; k < leaves.size(); ++k) {
            leaves[k] = tape.leaf(a.incentive->params().values[k]);
        }
    }

    // Incentive nets replayed on-tape over the old trajectories.
    // incentive_vars[b][t][i] holds giver i's outputs (n-1 slots).
    std::vector<std::vector<std::vector<std::vector<VarId>>>> incentive_vars(
        static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        const Trajectory& traj = old_trajs[static_cast<size_t>(b)];
        incentive_vars[static_cast<size_t>(b)].resize(traj.steps.size());
        for (size_t t = 0; t < traj.steps.size(); ++t) {
            auto& per_giver = incentive_vars[static_cast<size_t>(b)][t];
            per_giver.resize(static_cast<size_t>(n));
            const auto& s = traj.steps[t];
            for (int i = 0; i < n; ++i) {
                const Agent& giver = agents[static_cast<size_t>(i)];
                if (!giver.gives_learned_channel()) continue;
                per_giver[static_cast<size_t>(i)] = giver.incentive->compute_tape(
                    tape, inner.eta_leaves[static_cast<size_t>(i)],
                    s.obs[static_cast<size_t>(i)], actions_without(s.actions, i));
            }
        }
    }

    // Gift cost per learned giver, batch-averaged, sharing the recorded outputs.
    for (int i = 0; i < n; ++i) {
        if (!agents[static_cast<size_t>(i)].gives_learned_channel()) continue;
        VarId total = tape.constant(0.0);
        for (int b = 0; b < batch; ++b) {
            double discount = 1.0 / batch;
            for (size_t t = 0; t < old_trajs[static_cast<size_t>(b)].steps.size(); ++t) {
                for (VarId r : incentive_vars[static_cast<size_t>(b)][t][static_cast<size_t>(i)]) {
                    total = tape.fma_const(discount, total, tape.abs_(r));
                }
                discount *= hp.gamma;
            }
        }
        inner.gift_cost_vars[static_cast<size_t>(i)] = total;
    }

    // Inner policy updates.
    Tape scratch;
    for (int j = 0; j < n; ++j) {
        const Agent& agent = agents[static_cast<size_t>(j)];
        auto& theta_hat = inner.theta_hat_values[static_cast<size_t>(j)];
        auto& theta_delta = inner.theta_delta_values[static_cast<size_t>(j)];
        theta_hat = agent.policy_params.values;
        theta_delta.assign(theta_hat.size(), 0.0);
        if (!agent.trains_policy()) continue;

        const bool on_tape = learned_givers > 0 && agent.learns_from_incentives();
        const double sign = agent.mode == AgentMode::Reverse ? -1.0 : 1.0;

        if (!on_tape) {
            for (int b = 0; b < batch; ++b) {
                const auto delta =
                    policy_update_delta(agent, old_trajs[static_cast<size_t>(b)], hp);
                for (size_t k = 0; k < theta_delta.size(); ++k) {
                    theta_delta[k] += sign * (delta[k] / batch);
                }
            }
            for (size_t k = 0; k < theta_hat.size(); ++k) theta_hat[k] += theta_delta[k];
            continue;
        }

        // Returns on-tape: r_t = env + fake constants + learned gifts, then
        // G_t = r_t + gamma * G_{t+1}.
        std::vector<std::vector<VarId>> g_vars(static_cast<size_t>(batch));
        for (int b = 0; b < batch; ++b) {
            const Trajectory& traj = old_trajs[static_cast<size_t>(b)];
            const size_t len = traj.steps.size();
            std::vector<VarId> r_vars(len);
            for (size_t t = 0; t < len; ++t) {
                const auto& s = traj.steps[t];
                double base = s.env_rewards[static_cast<size_t>(j)];
                for (int i = 0; i < n; ++i) {
                    if (i != j && agents[static_cast<size_t>(i)].gives_constant_channel()) {
                        base += agents[static_cast<size_t>(i)].c_adv;
                    }
                }
                VarId r = tape.constant(base);
                for (int i = 0; i < n; ++i) {
                    if (i == j || !agents[static_cast<size_t>(i)].gives_learned_channel()) continue;
                    r = tape.add(
                        r, incentive_vars[static_cast<size_t>(b)][t][static_cast<size_t>(i)]
                                         [static_cast<size_t>(output_slot(i, j))]);
                }
                r_vars[t] = r;
            }
            auto& g = g_vars[static_cast<size_t>(b)];
            g.resize(len);
            for (size_t t = len; t-- > 0;) {
                g[t] = t + 1 < len ? tape.fma_const(hp.gamma, r_vars[t], g[t + 1]) : r_vars[t];
            }
        }

        // Deltas accumulate separately and are added to theta once, so the
        // Reverse delta is the bitwise negation of the benign one.
        auto& vars = inner.theta_hat_vars[static_cast<size_t>(j)];
        const size_t n_params = agent.policy_params.size();
        std::vector<VarId> delta_vars(n_params);
        std::vector<bool> touched(n_params, false);
        const VarId zero = tape.constant(0.0);
        for (size_t k = 0; k < n_params; ++k) delta_vars[k] = zero;
        const double coeff = sign * hp.beta / batch;
        for (int b = 0; b < batch; ++b) {
            const Trajectory& traj = old_trajs[static_cast<size_t>(b)];
            for (size_t t = 0; t < traj.steps.size(); ++t) {
                const auto& s = traj.steps[t];
                const auto grad = logp_grad(agent.policy_net, agent.policy_params.values,
                                            s.obs[static_cast<size_t>(j)],
                                            s.actions[static_cast<size_t>(j)], scratch);
                const VarId g_var = g_vars[static_cast<size_t>(b)][t];
                for (size_t k = 0; k < n_params; ++k) {
                    if (grad[k] != 0.0) {
                        delta_vars[k] = tape.fma_const(coeff * grad[k], delta_vars[k], g_var);
                        touched[k] = true;
                    }
                }
            }
        }
        vars.resize(n_params);
        for (size_t k = 0; k < n_params; ++k) {
            vars[k] = touched[k]
                          ? tape.add(tape.constant(agent.policy_params.values[k]), delta_vars[k])
                          : tape.constant(agent.policy_params.values[k]);
            theta_delta[k] = tape.val(delta_vars[k]);
            theta_hat[k] = tape.val(vars[k]);
        }
    }
    return inner;
}

std::vector<double> incentive_hypergradient(InnerUpdates& inner, int giver,
                                            const std::vector<Agent>& agents,
                                            std::span<const Trajectory> new_trajs,
                                            const Hyperparams& hp) {
    const int n = static_cast<int>(agents.size());
    if (inner.eta_leaves[static_cast<size_t>(giver)].empty()) {
        throw ContractError("incentive_hypergradient: giver has no recorded eta leaves");
    }
    Tape& tape = inner.tape;
    const int batch = static_cast<int>(new_trajs.size());

    if (!inner.logp_new_built) {
        inner.logp_new.resize(static_cast<size_t>(batch));
        for (int b = 0; b < batch; ++b) {
            const Trajectory& traj = new_trajs[static_cast<size_t>(b)];
            auto& per_agent = inner.logp_new[static_cast<size_t>(b)];
            per_agent.resize(static_cast<size_t>(n));
            for (int j = 0; j < n; ++j) {
                const auto& vars = inner.theta_hat_vars[static_cast<size_t>(j)];
                if (vars.empty()) continue;  // off-tape: no eta dependence
                auto& per_step = per_agent[static_cast<size_t>(j)];
                per_step.resize(traj.steps.size());
                for (size_t t = 0; t < traj.steps.size(); ++t) {
                    const auto& s = traj.steps[t];
                    const auto logits = agents[static_cast<size_t>(j)].policy_net.forward_tape(
                        tape, vars, s.obs[static_cast<size_t>(j)]);
                    per_step[t] =
                        log_prob_tape(tape, logits, s.actions[static_cast<size_t>(j)]);
                }
            }
        }
        inner.logp_new_built = true;
    }

    VarId surrogate = tape.constant(0.0);
    for (int b = 0; b < batch; ++b) {
        const Trajectory& traj = new_trajs[static_cast<size_t>(b)];
        std::vector<double> env_rewards(traj.steps.size());
        for (size_t t = 0; t < traj.steps.size(); ++t) {
            env_rewards[t] = traj.steps[t].env_rewards[static_cast<size_t>(giver)];
        }
        const auto g_hat = returns(env_rewards, hp.gamma);
        for (int j = 0; j < n; ++j) {
            const auto& per_step = inner.logp_new[static_cast<size_t>(b)][static_cast<size_t>(j)];
            for (size_t t = 0; t < per_step.size(); ++t) {
                if (g_hat[t] != 0.0) {
                    surrogate = tape.fma_const(g_hat[t] / batch, surrogate, per_step[t]);
                }
            }
        }
    }
    const VarId root = tape.sub(
        surrogate, tape.scale(hp.alpha, inner.gift_cost_vars[static_cast<size_t>(giver)]));
    const auto adj = tape.backward(root);

    const auto& leaves = inner.eta_leaves[static_cast<size_t>(giver)];
    std::vector<double> grad(leaves.size());
    for (size_t k = 0; k < leaves.size(); ++k) grad[k] = adj[static_cast<size_t>(leaves[k])];
    return grad;
}

IterationMetrics trajectory_metrics(const std::vector<Agent>& agents, const Trajectory& traj) {
    const int n = static_cast<int>(agents.size());
    IterationMetrics m;
    m.success = traj.success;
    m.success_rate = traj.success ? 1.0 : 0.0;
    m.env_return.assign(static_cast<size_t>(n), 0.0);
    m.total_return.assign(static_cast<size_t>(n), 0.0);
    m.inc_given.assign(static_cast<size_t>(n), 0.0);
    m.inc_received.assign(static_cast<size_t>(n), 0.0);
    for (const auto& s : traj.steps) {
        for (int a = 0; a < n; ++a) {
            m.env_return[static_cast<size_t>(a)] += s.env_rewards[static_cast<size_t>(a)];
            m.inc_given[static_cast<size_t>(a)] += s.incentives.given_by(a);
            m.inc_received[static_cast<size_t>(a)] += s.incentives.received_by(a);
        }
    }
    for (int a = 0; a < n; ++a) {
        const auto rewards = training_rewards(agents[static_cast<size_t>(a)], traj);
        for (double r : rewards) m.total_return[static_cast<size_t>(a)] += r;
    }
    return m;
}

IterationMetrics lio_iteration(Env& env, std::vector<Agent>& agents, const Hyperparams& hp,
                               std::mt19937_64& rng, Trajectory* first_traj) {
    hp.validate();
    std::vector<Trajectory> old_trajs;
    old_trajs.reserve(static_cast<size_t>(hp.batch));
    for (int b = 0; b < hp.batch; ++b) {
        old_trajs.push_back(generate_trajectory(env, agents, rng));
    }

    InnerUpdates inner = record_inner_updates(agents, old_trajs, hp);

    std::vector<Trajectory> new_trajs;
    new_trajs.reserve(static_cast<size_t>(hp.batch));
    for (int b = 0; b < hp.batch; ++b) {
        new_trajs.push_back(generate_trajectory(env, agents, rng, &inner.theta_hat_values));
    }

    std::vector<std::vector<double>> eta_grads(agents.size());
    for (size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].gives_learned_channel()) {
            eta_grads[i] =
                incentive_hypergradient(inner, static_cast<int>(i), agents, new_trajs, hp);
        }
    }

    for (size_t i = 0; i < agents.size(); ++i) {
        Agent& agent = agents[i];
        agent.policy_params.values = inner.theta_hat_values[i];
        agent.policy_params.check_finite();
        if (!eta_grads[i].empty()) {
            auto& eta = agent.incentive->params();
            for (size_t k = 0; k < eta.size(); ++k) eta.values[k] += hp.eta_lr * eta_grads[i][k];
            eta.check_finite();
        }
    }
    if (first_traj) *first_traj = old_trajs[0];

    IterationMetrics metrics = trajectory_metrics(agents, old_trajs[0]);
    if (hp.batch > 1) {
        for (int b = 1; b < hp.batch; ++b) {
            const IterationMetrics m = trajectory_metrics(agents, old_trajs[static_cast<size_t>(b)]);
            metrics.success_rate += m.success_rate;
            for (size_t a = 0; a < agents.size(); ++a) {
                metrics.env_return[a] += m.env_return[a];
                metrics.total_return[a] += m.total_return[a];
                metrics.inc_given[a] += m.inc_given[a];
                metrics.inc_received[a] += m.inc_received[a];
            }
        }
        const double inv = 1.0 / hp.batch;
        metrics.success_rate *= inv;
        for (size_t a = 0; a < agents.size(); ++a) {
            metrics.env_return[a] *= inv;
            metrics.total_return[a] *= inv;
            metrics.inc_given[a] *= inv;
            metrics.inc_received[a] *= inv;
        }
    }
    return metrics;
}

}  // namespace arena

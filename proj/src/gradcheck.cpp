#include "arena/gradcheck.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace arena {
namespace {

// Hand-written backprop of log softmax(mlp(x))[action] for a one-hidden-layer
// tanh net with identity output. Oracle-side; never touches the tape.
std::vector<double> hand_logp_grad(int in, int hidden, int out, std::span<const double> p,
                                   std::span<const double> x, int action) {
    const double* w1 = p.data();
    const double* b1 = w1 + static_cast<size_t>(hidden) * in;
    const double* w2 = b1 + hidden;
    const double* b2 = w2 + static_cast<size_t>(out) * hidden;

    std::vector<double> h(static_cast<size_t>(hidden));
    for (int k = 0; k < hidden; ++k) {
        double acc = b1[k];
        for (int i = 0; i < in; ++i) acc += w1[static_cast<size_t>(k) * in + i] * x[i];
        h[static_cast<size_t>(k)] = std::tanh(acc);
    }
    std::vector<double> z(static_cast<size_t>(out));
    for (int o = 0; o < out; ++o) {
        double acc = b2[o];
        for (int k = 0; k < hidden; ++k) acc += w2[static_cast<size_t>(o) * hidden + k] * h[static_cast<size_t>(k)];
        z[static_cast<size_t>(o)] = acc;
    }
    const auto pi = softmax(z);

    std::vector<double> dz(static_cast<size_t>(out));
    for (int o = 0; o < out; ++o) dz[static_cast<size_t>(o)] = (o == action ? 1.0 : 0.0) - pi[static_cast<size_t>(o)];

    std::vector<double> grad(p.size(), 0.0);
    double* gw1 = grad.data();
    double* gb1 = gw1 + static_cast<size_t>(hidden) * in;
    double* gw2 = gb1 + hidden;
    double* gb2 = gw2 + static_cast<size_t>(out) * hidden;

    std::vector<double> dh(static_cast<size_t>(hidden), 0.0);
    for (int o = 0; o < out; ++o) {
        gb2[o] = dz[static_cast<size_t>(o)];
        for (int k = 0; k < hidden; ++k) {
            gw2[static_cast<size_t>(o) * hidden + k] = dz[static_cast<size_t>(o)] * h[static_cast<size_t>(k)];
            dh[static_cast<size_t>(k)] += dz[static_cast<size_t>(o)] * w2[static_cast<size_t>(o) * hidden + k];
        }
    }
    for (int k = 0; k < hidden; ++k) {
        const double dpre = dh[static_cast<size_t>(k)] * (1.0 - h[static_cast<size_t>(k)] * h[static_cast<size_t>(k)]);
        gb1[k] = dpre;
        for (int i = 0; i < in; ++i) gw1[static_cast<size_t>(k) * in + i] = dpre * x[i];
    }
    return grad;
}

double hand_logp(const Mlp& net, std::span<const double> params, std::span<const double> obs,
                 int action) {
    const auto z = net.forward(params, obs);
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return z[static_cast<size_t>(action)] - (m + std::log(s));
}

// Value of the giver's sampled outer objective on frozen trajectories,
// recomputed from scratch with plain arithmetic at the supplied eta.
double oracle_surrogate(const std::vector<Agent>& agents, int giver,
                        const std::vector<double>& eta_giver, const Trajectory& old_t,
                        const Trajectory& new_t, const Hyperparams& hp) {
    const int n = static_cast<int>(agents.size());
    std::vector<Agent> local = agents;
    local[static_cast<size_t>(giver)].incentive->params().values = eta_giver;

    // Recompute the gift matrix of the old trajectory at the current eta.
    std::vector<std::vector<std::vector<double>>> gifts(old_t.steps.size());
    for (size_t t = 0; t < old_t.steps.size(); ++t) {
        gifts[t].resize(static_cast<size_t>(n));
        const auto& s = old_t.steps[t];
        for (int i = 0; i < n; ++i) {
            if (!local[static_cast<size_t>(i)].gives_learned_channel()) continue;
            std::vector<int> others;
            for (int a = 0; a < n; ++a) {
                if (a != i) others.push_back(s.actions[static_cast<size_t>(a)]);
            }
            gifts[t][static_cast<size_t>(i)] =
                local[static_cast<size_t>(i)].incentive->compute(s.obs[static_cast<size_t>(i)], others);
        }
    }

    // Inner updates with hand-written backprop.
    std::vector<std::vector<double>> theta_hat(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const Agent& agent = local[static_cast<size_t>(j)];
        theta_hat[static_cast<size_t>(j)] = agent.policy_params.values;
        if (!agent.trains_policy()) continue;
        std::vector<double> rewards(old_t.steps.size());
        for (size_t t = 0; t < old_t.steps.size(); ++t) {
            double r = old_t.steps[t].env_rewards[static_cast<size_t>(j)];
            if (agent.learns_from_incentives()) {
                for (int i = 0; i < n; ++i) {
                    if (i == j) continue;
                    if (!gifts[t][static_cast<size_t>(i)].empty()) {
                        const int slot = j < i ? j : j - 1;
                        r += gifts[t][static_cast<size_t>(i)][static_cast<size_t>(slot)];
                    }
                    if (local[static_cast<size_t>(i)].gives_constant_channel()) {
                        r += local[static_cast<size_t>(i)].c_adv;
                    }
                }
            }
            rewards[t] = r;
        }
        const auto g = returns(rewards, hp.gamma);
        const double sign = agent.mode == AgentMode::Reverse ? -1.0 : 1.0;
        for (size_t t = 0; t < old_t.steps.size(); ++t) {
            const auto& s = old_t.steps[t];
            const auto grad = hand_logp_grad(
                agent.policy_net.input_size(), agent.policy_net.hidden_size(),
                agent.policy_net.output_size(), agent.policy_params.values,
                s.obs[static_cast<size_t>(j)], s.actions[static_cast<size_t>(j)]);
            for (size_t k = 0; k < theta_hat[static_cast<size_t>(j)].size(); ++k) {
                theta_hat[static_cast<size_t>(j)][k] += sign * hp.beta * grad[k] * g[t];
            }
        }
    }

    // Score-weighted log-likelihood of the frozen new trajectory plus cost.
    std::vector<double> env_rewards(new_t.steps.size());
    for (size_t t = 0; t < new_t.steps.size(); ++t) {
        env_rewards[t] = new_t.steps[t].env_rewards[static_cast<size_t>(giver)];
    }
    const auto g_hat = returns(env_rewards, hp.gamma);

    double phi = 0.0;
    for (int j = 0; j < n; ++j) {
        if (!local[static_cast<size_t>(j)].trains_policy()) continue;
        for (size_t t = 0; t < new_t.steps.size(); ++t) {
            const auto& s = new_t.steps[t];
            phi += g_hat[t] * hand_logp(local[static_cast<size_t>(j)].policy_net,
                                        theta_hat[static_cast<size_t>(j)],
                                        s.obs[static_cast<size_t>(j)],
                                        s.actions[static_cast<size_t>(j)]);
        }
    }

    std::vector<IncentiveInputs> inputs;
    for (const auto& s : old_t.steps) {
        std::vector<int> others;
        for (int a = 0; a < n; ++a) {
            if (a != giver) others.push_back(s.actions[static_cast<size_t>(a)]);
        }
        inputs.push_back({s.obs[static_cast<size_t>(giver)], others});
    }
    phi -= hp.alpha * gift_cost(*local[static_cast<size_t>(giver)].incentive, inputs, hp.gamma);
    return phi;
}

double rel_err(double numeric, double analytic) {
    const double diff = std::abs(numeric - analytic);
    if (diff <= 1e-8) return 0.0;
    return diff / std::max(std::abs(numeric), std::abs(analytic));
}

}  // namespace

MatrixGame::MatrixGame(const std::array<std::array<std::pair<double, double>, 2>, 2>& payoff)
    : payoff_(payoff) {}

std::vector<double> MatrixGame::observe(int agent) const {
    if (agent != 0 && agent != 1) throw ContractError("MatrixGame::observe: bad agent");
    return {1.0};
}

StepOutcome MatrixGame::step(std::span<const int> actions) {
    if (done_) throw ContractError("MatrixGame::step after termination");
    if (actions.size() != 2) throw ContractError("MatrixGame::step: expected 2 actions");
    done_ = true;
    const auto [r0, r1] = payoff_[static_cast<size_t>(actions[0])][static_cast<size_t>(actions[1])];
    StepOutcome out;
    out.env_rewards = {r0, r1};
    out.done = true;
    out.obs = {observe(0), observe(1)};
    return out;
}

double MatrixGame::max_env_reward() const {
    double m = payoff_[0][0].first;
    for (const auto& row : payoff_) {
        for (const auto& [a, b] : row) m = std::max({m, a, b});
    }
    return m;
}

GradCheckReport run_gradient_checks(int trials) {
    GradCheckReport report;
    report.pass = true;

    Hyperparams hp;
    hp.gamma = 0.99;
    hp.beta = 0.1;
    hp.alpha = 0.3;
    hp.eta_lr = 0.01;
    hp.batch = 1;

    const double hyper_rtol = 1e-4;
    const double other_rtol = 1e-5;
    const double fd_step = 1e-5;

    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(0x9e3779b9u + static_cast<std::uint64_t>(trial));
        std::uniform_real_distribution<double> payoff_dist(-2.0, 2.0);
        std::array<std::array<std::pair<double, double>, 2>, 2> payoff;
        for (auto& row : payoff) {
            for (auto& cell : row) cell = {payoff_dist(rng), payoff_dist(rng)};
        }
        MatrixGame env(payoff);

        const Mlp policy_shape(1, 4, 2);
        std::vector<Agent> agents;
        for (int i = 0; i < 2; ++i) {
            Agent agent(i, AgentMode::LioBenign, policy_shape);
            agent.policy_params = policy_shape.random_params(rng, 0.5);
            agent.incentive.emplace(1, 1, 2, 4, 2.0);
            agent.incentive->params() = agent.incentive->net().random_params(rng, 0.5);
            agents.push_back(std::move(agent));
        }

        std::mt19937_64 traj_rng(0x5151 + static_cast<std::uint64_t>(trial));
        const Trajectory old_t = generate_trajectory(env, agents, traj_rng);
        InnerUpdates inner = record_inner_updates(agents, std::span(&old_t, 1), hp);
        const Trajectory new_t = generate_trajectory(env, agents, traj_rng, &inner.theta_hat_values);

        // --- hypergradient vs frozen-trajectory finite differences ---
        const auto analytic = incentive_hypergradient(inner, 0, agents, std::span(&new_t, 1), hp);
        const auto eta0 = agents[0].incentive->params().values;
        for (size_t k = 0; k < eta0.size(); ++k) {
            auto plus = eta0, minus = eta0;
            plus[k] += fd_step;
            minus[k] -= fd_step;
            const double numeric = (oracle_surrogate(agents, 0, plus, old_t, new_t, hp) -
                                    oracle_surrogate(agents, 0, minus, old_t, new_t, hp)) /
                                   (2.0 * fd_step);
            report.worst_hypergradient_err =
                std::max(report.worst_hypergradient_err, rel_err(numeric, analytic[k]));
        }

        // --- policy gradient on a multi-step environment ---
        {
            EscapeRoom er(2, 1, 5);
            std::vector<Agent> er_agents;
            const Mlp er_policy(er.obs_size(), 8, er.action_count());
            for (int i = 0; i < 2; ++i) {
                Agent agent(i, AgentMode::LioBenign, er_policy);
                agent.policy_params = er_policy.random_params(rng, 0.5);
                agent.incentive.emplace(er.obs_size(), 1, er.action_count(), 4, 2.0);
                agent.incentive->params() = agent.incentive->net().random_params(rng, 0.5);
                er_agents.push_back(std::move(agent));
            }
            const Trajectory traj = generate_trajectory(er, er_agents, traj_rng);
            const Agent& agent = er_agents[0];
            const auto delta = policy_update_delta(agent, traj, hp);
            std::vector<double> grad(delta.size());
            for (size_t k = 0; k < delta.size(); ++k) grad[k] = delta[k] / hp.beta;

            const auto rewards = training_rewards(agent, traj);
            const auto g = returns(rewards, hp.gamma);
            auto objective = [&](const ParamVector& theta) {
                double v = 0.0;
                for (size_t t = 0; t < traj.steps.size(); ++t) {
                    v += g[t] * hand_logp(agent.policy_net, theta.values, traj.steps[t].obs[0],
                                          traj.steps[t].actions[0]);
                }
                return v;
            };
            const auto fd = finite_diff_check(objective, agent.policy_params, grad, fd_step,
                                              other_rtol);
            report.worst_policy_err = std::max(report.worst_policy_err, fd.max_rel_err);

            // --- gift cost ---
            std::vector<IncentiveInputs> inputs;
            for (const auto& s : traj.steps) inputs.push_back({s.obs[0], {s.actions[1]}});
            const IncentiveFunction& inc = *agent.incentive;
            Tape tape;
            std::vector<VarId> leaves(inc.params().size());
            for (size_t k = 0; k < leaves.size(); ++k) leaves[k] = tape.leaf(inc.params().values[k]);
            const VarId cost = gift_cost_tape(tape, inc, leaves, inputs, hp.gamma);
            const auto adj = tape.backward(cost);
            std::vector<double> cost_grad(leaves.size());
            for (size_t k = 0; k < leaves.size(); ++k) cost_grad[k] = adj[static_cast<size_t>(leaves[k])];

            auto cost_fn = [&](const ParamVector& eta) {
                IncentiveFunction probe = inc;
                probe.params().values = eta.values;
                return gift_cost(probe, inputs, hp.gamma);
            };
            const auto fd_cost =
                finite_diff_check(cost_fn, inc.params(), cost_grad, fd_step, other_rtol);
            report.worst_gift_cost_err = std::max(report.worst_gift_cost_err, fd_cost.max_rel_err);
        }
    }

    std::ostringstream line;
    line << "hypergradient: max rel err " << report.worst_hypergradient_err << " (rtol "
         << hyper_rtol << ")";
    report.lines.push_back(line.str());
    line.str("");
    line << "policy gradient: max rel err " << report.worst_policy_err << " (rtol " << other_rtol
         << ")";
    report.lines.push_back(line.str());
    line.str("");
    line << "gift cost gradient: max rel err " << report.worst_gift_cost_err << " (rtol "
         << other_rtol << ")";
    report.lines.push_back(line.str());

    report.pass = report.worst_hypergradient_err <= hyper_rtol &&
                  report.worst_policy_err <= other_rtol &&
                  report.worst_gift_cost_err <= other_rtol;
    return report;
}

}  // namespace arena

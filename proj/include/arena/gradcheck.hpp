#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "arena/learner.hpp"

namespace arena {

struct GradCheckReport {
    bool pass = false;
    std::vector<std::string> lines;
    double worst_hypergradient_err = 0.0;
    double worst_policy_err = 0.0;
    double worst_gift_cost_err = 0.0;
};

// One-step two-agent two-action matrix game; the smallest environment that
// exercises the full two-phase update.
class MatrixGame final : public Env {
public:
    explicit MatrixGame(const std::array<std::array<std::pair<double, double>, 2>, 2>& payoff);

    void reset() override { done_ = false; }
    int n_agents() const override { return 2; }
    int action_count() const override { return 2; }
    int obs_size() const override { return 1; }
    std::vector<double> observe(int agent) const override;
    StepOutcome step(std::span<const int> actions) override;
    bool done() const override { return done_; }
    bool success() const override { return false; }
    bool success_defined() const override { return false; }
    int noop_action(int) const override { return 0; }
    double max_env_reward() const override;

private:
    std::array<std::array<std::pair<double, double>, 2>, 2> payoff_;
    bool done_ = false;
};

// Runs the three gradient suites:
//   - hypergradient vs. frozen-trajectory finite differences, rtol 1e-4
//   - policy-gradient delta vs. finite differences, rtol 1e-5
//   - gift-cost gradient vs. finite differences, rtol 1e-5
// The oracle path uses hand-written backprop and plain forwards; it never
// touches the tape.
GradCheckReport run_gradient_checks(int trials);

}  // namespace arena

#include "arena/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace arena {

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

VarId Tape::sigmoid_(VarId a) {
    return push(Op::Sigmoid, a, -1, 0.0, arena::sigmoid(val(a)));
}

std::vector<double> Tape::backward(VarId root) const {
    if (root < 0 || static_cast<size_t>(root) >= nodes_.size()) {
        throw ContractError("backward: root is not a node on this tape");
    }
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[static_cast<size_t>(root)] = 1.0;
    for (VarId i = root; i >= 0; --i) {
        const double g = adj[static_cast<size_t>(i)];
        if (g == 0.0) continue;
        const Node& n = nodes_[static_cast<size_t>(i)];
        switch (n.op) {
            case Op::Const:
            case Op::Leaf:
                break;
            case Op::Add:
                adj[static_cast<size_t>(n.a)] += g;
                adj[static_cast<size_t>(n.b)] += g;
                break;
            case Op::Sub:
                adj[static_cast<size_t>(n.a)] += g;
                adj[static_cast<size_t>(n.b)] -= g;
                break;
            case Op::Mul:
                adj[static_cast<size_t>(n.a)] += g * val(n.b);
                adj[static_cast<size_t>(n.b)] += g * val(n.a);
                break;
            case Op::Neg:
                adj[static_cast<size_t>(n.a)] -= g;
                break;
            case Op::Exp:
                adj[static_cast<size_t>(n.a)] += g * n.val;
                break;
            case Op::Log:
                adj[static_cast<size_t>(n.a)] += g / val(n.a);
                break;
            case Op::Tanh:
                adj[static_cast<size_t>(n.a)] += g * (1.0 - n.val * n.val);
                break;
            case Op::Sigmoid:
                adj[static_cast<size_t>(n.a)] += g * n.val * (1.0 - n.val);
                break;
            case Op::Abs: {
                double x = val(n.a);
                adj[static_cast<size_t>(n.a)] += g * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
                break;
            }
            case Op::Scale:
                adj[static_cast<size_t>(n.a)] += g * n.aux;
                break;
            case Op::AddConst:
                adj[static_cast<size_t>(n.a)] += g;
                break;
            case Op::FmaConst:
                adj[static_cast<size_t>(n.a)] += g;
                adj[static_cast<size_t>(n.b)] += g * n.aux;
                break;
        }
    }
    return adj;
}

std::vector<double> softmax(std::span<const double> logits) {
    double m = -std::numeric_limits<double>::infinity();
    for (double z : logits) m = std::max(m, z);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

int sample_categorical(std::span<const double> probs, double u) {
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

void ParamVector::check_finite() const {
    for (size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw ContractError("non-finite parameter at index " + std::to_string(i));
        }
    }
}

Mlp::Mlp(int in, int hidden, int out, OutputActivation act, double bound)
    : in_(in), hidden_(hidden), out_(out), act_(act), bound_(bound) {
    if (in <= 0 || hidden <= 0 || out <= 0) {
        throw ConfigError("Mlp: layer sizes must be positive");
    }
}

size_t Mlp::param_count() const {
    return static_cast<size_t>(hidden_) * in_ + hidden_ +
           static_cast<size_t>(out_) * hidden_ + out_;
}

ParamVector Mlp::make_params() const {
    ParamVector p;
    p.values.assign(param_count(), 0.0);
    size_t off = 0;
    auto seg = [&](const std::string& name, size_t extent) {
        p.segments.push_back({name, off, extent});
        off += extent;
    };
    seg("w1", static_cast<size_t>(hidden_) * in_);
    seg("b1", static_cast<size_t>(hidden_));
    seg("w2", static_cast<size_t>(out_) * hidden_);
    seg("b2", static_cast<size_t>(out_));
    return p;
}

ParamVector Mlp::random_params(std::mt19937_64& rng, double stddev) const {
    ParamVector p = make_params();
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : p.values) v = dist(rng);
    return p;
}

void Mlp::check_shapes(size_t n_params, size_t n_input) const {
    if (n_params != param_count()) {
        throw ConfigError("Mlp: parameter count mismatch: got " + std::to_string(n_params) +
                          ", expected " + std::to_string(param_count()));
    }
    if (n_input != static_cast<size_t>(in_)) {
        throw ConfigError("Mlp: input length mismatch: got " + std::to_string(n_input) +
                          ", expected " + std::to_string(in_));
    }
}

std::vector<double> Mlp::forward(std::span<const double> params,
                                 std::span<const double> input) const {
    check_shapes(params.size(), input.size());
    const double* w1 = params.data();
    const double* b1 = w1 + static_cast<size_t>(hidden_) * in_;
    const double* w2 = b1 + hidden_;
    const double* b2 = w2 + static_cast<size_t>(out_) * hidden_;

    std::vector<double> h(static_cast<size_t>(hidden_));
    for (int k = 0; k < hidden_; ++k) {
        double acc = b1[k];
        for (int i = 0; i < in_; ++i) acc += w1[static_cast<size_t>(k) * in_ + i] * input[i];
        h[static_cast<size_t>(k)] = std::tanh(acc);
    }
    std::vector<double> out(static_cast<size_t>(out_));
    for (int o = 0; o < out_; ++o) {
        double acc = b2[o];
        for (int k = 0; k < hidden_; ++k) acc += w2[static_cast<size_t>(o) * hidden_ + k] * h[static_cast<size_t>(k)];
        out[static_cast<size_t>(o)] =
            act_ == OutputActivation::BoundedSigmoid ? bound_ * sigmoid(acc) : acc;
    }
    return out;
}

std::vector<VarId> Mlp::forward_tape(Tape& tape, std::span<const VarId> params,
                                     std::span<const double> input) const {
    check_shapes(params.size(), input.size());
    const VarId* w1 = params.data();
    const VarId* b1 = w1 + static_cast<size_t>(hidden_) * in_;
    const VarId* w2 = b1 + hidden_;
    const VarId* b2 = w2 + static_cast<size_t>(out_) * hidden_;

    std::vector<VarId> h(static_cast<size_t>(hidden_));
    for (int k = 0; k < hidden_; ++k) {
        VarId acc = b1[k];
        for (int i = 0; i < in_; ++i) {
            if (input[i] != 0.0) {
                acc = tape.fma_const(input[i], acc, w1[static_cast<size_t>(k) * in_ + i]);
            }
        }
        h[static_cast<size_t>(k)] = tape.tanh_(acc);
    }
    std::vector<VarId> out(static_cast<size_t>(out_));
    for (int o = 0; o < out_; ++o) {
        VarId acc = b2[o];
        for (int k = 0; k < hidden_; ++k) {
            acc = tape.add(acc, tape.mul(w2[static_cast<size_t>(o) * hidden_ + k],
                                         h[static_cast<size_t>(k)]));
        }
        out[static_cast<size_t>(o)] =
            act_ == OutputActivation::BoundedSigmoid ? tape.scale(bound_, tape.sigmoid_(acc))
                                                     : acc;
    }
    return out;
}

VarId log_prob_tape(Tape& tape, std::span<const VarId> logits, int index) {
    if (index < 0 || static_cast<size_t>(index) >= logits.size()) {
        throw ContractError("log_prob_tape: action index out of range");
    }
    double m = -std::numeric_limits<double>::infinity();
    for (VarId z : logits) m = std::max(m, tape.val(z));
    // m is treated as a constant shift; gradient is unaffected.
    VarId sum = tape.constant(0.0);
    for (VarId z : logits) {
        sum = tape.add(sum, tape.exp_(tape.add_const(-m, z)));
    }
    VarId lse = tape.add_const(m, tape.log_(sum));
    return tape.sub(logits[static_cast<size_t>(index)], lse);
}

FdReport finite_diff_check(const std::function<double(const ParamVector&)>& f,
                           const ParamVector& params, std::span<const double> analytic,
                           double step, double rtol) {
    if (analytic.size() != params.size()) {
        throw ConfigError("finite_diff_check: gradient length mismatch");
    }
    FdReport report{true, 0.0, 0};
    ParamVector p = params;
    for (size_t i = 0; i < p.values.size(); ++i) {
        const double orig = p.values[i];
        p.values[i] = orig + step;
        const double fp = f(p);
        p.values[i] = orig - step;
        const double fm = f(p);
        p.values[i] = orig;
        const double numeric = (fp - fm) / (2.0 * step);
        const double diff = std::abs(numeric - analytic[i]);
        // Differences below the absolute floor count as exact.
        const double rel =
            diff <= 1e-8 ? 0.0 : diff / std::max(std::abs(numeric), std::abs(analytic[i]));
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    report.pass = report.max_rel_err <= rtol;
    return report;
}

}  // namespace arena

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace arena {

// Invalid configuration supplied by the caller (bad shapes, bad config keys).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An internal contract was violated at runtime (stepping a finished episode,
// mismatched tapes, non-finite parameters).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

using VarId = std::int32_t;

// Append-only record of scalar primitive operations. Operands always precede
// their consumers, so a single reverse sweep computes all adjoints.
class Tape {
public:
    VarId constant(double v) { return push(Op::Const, -1, -1, 0.0, v); }
    VarId leaf(double v) { return push(Op::Leaf, -1, -1, 0.0, v); }

    VarId add(VarId a, VarId b) { return push(Op::Add, a, b, 0.0, val(a) + val(b)); }
    VarId sub(VarId a, VarId b) { return push(Op::Sub, a, b, 0.0, val(a) - val(b)); }
    VarId mul(VarId a, VarId b) { return push(Op::Mul, a, b, 0.0, val(a) * val(b)); }
    VarId neg(VarId a) { return push(Op::Neg, a, -1, 0.0, -val(a)); }
    VarId exp_(VarId a) { return push(Op::Exp, a, -1, 0.0, std::exp(val(a))); }
    VarId log_(VarId a) { return push(Op::Log, a, -1, 0.0, std::log(val(a))); }
    VarId tanh_(VarId a) { return push(Op::Tanh, a, -1, 0.0, std::tanh(val(a))); }
    VarId sigmoid_(VarId a);
    VarId abs_(VarId a) { return push(Op::Abs, a, -1, 0.0, std::abs(val(a))); }
    // c * x
    VarId scale(double c, VarId x) { return push(Op::Scale, x, -1, c, c * val(x)); }
    // c + x
    VarId add_const(double c, VarId x) { return push(Op::AddConst, x, -1, c, c + val(x)); }
    // acc + c * x  (fused; the workhorse of the recorded policy update)
    VarId fma_const(double c, VarId acc, VarId x) {
        return push(Op::FmaConst, acc, x, c, val(acc) + c * val(x));
    }

    double val(VarId id) const { return nodes_[static_cast<size_t>(id)].val; }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Adjoints of every node with respect to the scalar root.
    std::vector<double> backward(VarId root) const;

private:
    enum class Op : std::uint8_t {
        Const, Leaf, Add, Sub, Mul, Neg, Exp, Log, Tanh, Sigmoid, Abs,
        Scale, AddConst, FmaConst
    };
    struct Node {
        Op op;
        VarId a, b;
        double aux;
        double val;
    };
    VarId push(Op op, VarId a, VarId b, double aux, double v) {
        nodes_.push_back(Node{op, a, b, aux, v});
        return static_cast<VarId>(nodes_.size() - 1);
    }
    std::vector<Node> nodes_;
};

double sigmoid(double x);

// Numerically stable softmax (max subtraction). Total on finite inputs.
std::vector<double> softmax(std::span<const double> logits);

// Inverse-CDF draw from a categorical distribution given u in [0,1).
int sample_categorical(std::span<const double> probs, double u);

// Flat parameter container with named segment layout.
struct ParamVector {
    struct Segment {
        std::string name;
        size_t offset;
        size_t extent;
    };
    std::vector<double> values;
    std::vector<Segment> segments;

    size_t size() const { return values.size(); }
    void check_finite() const;
};

enum class OutputActivation { Identity, BoundedSigmoid };

// Single-hidden-layer perceptron, tanh hidden units. Parameters live outside
// the object so the same shape can be evaluated at plain or tape-recorded
// parameter values.
class Mlp {
public:
    Mlp(int in, int hidden, int out, OutputActivation act = OutputActivation::Identity,
        double bound = 1.0);

    int input_size() const { return in_; }
    int hidden_size() const { return hidden_; }
    int output_size() const { return out_; }
    size_t param_count() const;

    ParamVector make_params() const;
    ParamVector random_params(std::mt19937_64& rng, double stddev) const;

    std::vector<double> forward(std::span<const double> params,
                                std::span<const double> input) const;
    std::vector<VarId> forward_tape(Tape& tape, std::span<const VarId> params,
                                    std::span<const double> input) const;

private:
    void check_shapes(size_t n_params, size_t n_input) const;
    int in_, hidden_, out_;
    OutputActivation act_;
    double bound_;
};

// log softmax(logits)[index], recorded on the tape (log-sum-exp with a
// constant max shift taken from current values).
VarId log_prob_tape(Tape& tape, std::span<const VarId> logits, int index);

struct FdReport {
    bool pass;
    double max_rel_err;
    size_t worst_index;
};

// Central-difference check of an analytic gradient, with an absolute floor
// of 1e-8 near zero.
FdReport finite_diff_check(const std::function<double(const ParamVector&)>& f,
                           const ParamVector& params, std::span<const double> analytic,
                           double step, double rtol);

}  // namespace arena

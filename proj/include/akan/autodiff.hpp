#pragma once
// Scalar reverse-mode automatic differentiation.
//
// A Tape is an append-only list of nodes. Each node stores its value and, for every
// parent, the local partial derivative d(node)/d(parent); the reverse sweep in
// Tape::gradient therefore needs no knowledge of the operation that produced a node.
// Nodes are appended in evaluation order, so the tape is topologically sorted by
// construction.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace akan {

enum class OpKind : std::uint8_t {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,   // a * x + b with constant a, b
    Affine,  // sum_i w_i x_i + b with constant w, b
    Sum,
    Pow,     // x^c with constant exponent
    Exp,
    Sin,
    Tanh,
    Relu,
    Abs,
    Clamp,
    Custom,  // value and partials supplied by the caller (fused device evaluation)
};

const char* to_string(OpKind op);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape is alive
/// and has not been cleared.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

    double value() const;
    std::uint32_t index() const noexcept { return index_; }
    Tape* tape() const noexcept { return tape_; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Drops all nodes but keeps allocated capacity.
    void clear();
    void reserve(std::size_t nodes, std::size_t edges);

    Var variable(double value);
    std::vector<Var> variables(std::span<const double> values);
    Var constant(double value);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var neg(Var a);
    Var scale(Var x, double a, double b = 0.0);
    Var affine(std::span<const Var> xs, std::span<const double> weights, double bias);
    Var sum(std::span<const Var> xs);
    Var pow(Var x, double exponent);
    Var exp(Var x);
    Var sin(Var x);
    Var tanh(Var x);
    /// Subgradient at 0 is 0.
    Var relu(Var x);
    /// Subgradient at 0 is 0.
    Var abs(Var x);
    /// Derivative 1 strictly inside [lo, hi], 0 on or outside the boundary.
    Var clamp(Var x, double lo, double hi);
    Var custom(std::span<const Var> parents, double value, std::span<const double> partials);

    double value(Var v) const { return nodes_[v.index()].value; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return parents_.size(); }
    OpKind op(std::size_t node) const { return nodes_[node].op; }

    /// Smallest distance from any ReLU/abs/clamp argument to its kink, +inf if none.
    double min_kink_distance() const noexcept { return min_kink_; }

    /// d(output)/d(wrt[i]) for every i, by one reverse sweep. Throws NumericalError naming
    /// the first node (in evaluation order) with a non-finite value or partial.
    std::vector<double> gradient(Var output, std::span<const Var> wrt) const;

private:
    struct Node {
        double value;
        std::uint32_t edge_begin;
        std::uint32_t edge_count;
        OpKind op;
    };

    Var push(OpKind op, double value, std::initializer_list<std::pair<Var, double>> edges);
    void note_kink(double distance) noexcept;

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> parents_;
    std::vector<double> partials_;
    double min_kink_ = std::numeric_limits<double>::infinity();
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);

Var tanh(Var x);
Var exp(Var x);
Var sin(Var x);
Var relu(Var x);
Var abs(Var x);
Var pow(Var x, double exponent);

/// Box constraint for one scalar; infinite bounds mean unconstrained.
struct Bounds {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    bool bounded() const noexcept;
    double project(double x) const noexcept;
};

struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Flat vector of trainable scalars with named slices and per-scalar boxes.
class ParamSet {
public:
    /// Appends a named block; `bounds` is either empty (unbounded) or one entry per value.
    void add(std::string name, std::span<const double> values, std::span<const Bounds> bounds = {});
    void add(std::string name, double value, Bounds bounds = {});

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const Bounds> bounds() const noexcept { return bounds_; }
    const std::vector<ParamSlice>& slices() const noexcept { return slices_; }

    const ParamSlice& slice(std::string_view name) const;
    std::span<const double> values_of(std::string_view name) const;

    void project() noexcept;
    bool feasible() const noexcept;

    /// Leaf variables on `tape`, one per scalar, in storage order.
    std::vector<Var> bind(Tape& tape) const;

private:
    std::vector<double> values_;
    std::vector<Bounds> bounds_;
    std::vector<ParamSlice> slices_;
};

/// Gradient of `loss` w.r.t. `params` (all on the same tape).
std::vector<double> grad(Var loss, std::span<const Var> params);

/// Builds a scalar on a fresh tape from leaf variables.
using TapedFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct FdComponent {
    double autodiff = 0.0;
    double finite_difference = 0.0;
    double relative_error = 0.0;
    bool passed = false;
};

struct FdReport {
    std::vector<FdComponent> components;
    double max_relative_error = 0.0;
    bool passed = false;
    /// Set when a ReLU/abs/clamp argument sits within `kink_tolerance` of its kink.
    bool skipped = false;
    std::string note;
};

/// Relative error |a - b| / max(|a|, |b|), or 0 when both are exactly 0.
double relative_error(double a, double b) noexcept;

/// Compares Tape::gradient with central differences (f(x+h e_i) - f(x-h e_i)) / 2h.
/// Points within `kink_tolerance` of a non-differentiable primitive are reported as
/// skipped rather than failed. Throws ArgumentError when h <= 0.
FdReport finite_difference_check(const TapedFunction& f, std::span<const double> params, double h, double tolerance,
                                 double kink_tolerance = 1e-7);

}  // namespace akan

#include "akan/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "akan/errors.hpp"

namespace akan {

const char* to_string(OpKind op) {
    switch (op) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Constant: return "constant";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Neg: return "neg";
        case OpKind::Scale: return "scale";
        case OpKind::Affine: return "affine";
        case OpKind::Sum: return "sum";
        case OpKind::Pow: return "pow";
        case OpKind::Exp: return "exp";
        case OpKind::Sin: return "sin";
        case OpKind::Tanh: return "tanh";
        case OpKind::Relu: return "relu";
        case OpKind::Abs: return "abs";
        case OpKind::Clamp: return "clamp";
        case OpKind::Custom: return "custom";
    }
    return "?";
}

double Var::value() const {
    assert(tape_ != nullptr);
    return tape_->value(*this);
}

void Tape::clear() {
    nodes_.clear();
    parents_.clear();
    partials_.clear();
    min_kink_ = std::numeric_limits<double>::infinity();
}

void Tape::reserve(std::size_t nodes, std::size_t edges) {
    nodes_.reserve(nodes);
    parents_.reserve(edges);
    partials_.reserve(edges);
}

Var Tape::push(OpKind op, double value, std::initializer_list<std::pair<Var, double>> edges) {
    const auto begin = static_cast<std::uint32_t>(parents_.size());
    for (const auto& [parent, partial] : edges) {
        assert(parent.tape() == this);
        parents_.push_back(parent.index());
        partials_.push_back(partial);
    }
    nodes_.push_back(Node{value, begin, static_cast<std::uint32_t>(edges.size()), op});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::note_kink(double distance) noexcept { min_kink_ = std::min(min_kink_, distance); }

Var Tape::variable(double value) { return push(OpKind::Leaf, value, {}); }

std::vector<Var> Tape::variables(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(variable(v));
    return out;
}

Var Tape::constant(double value) { return push(OpKind::Constant, value, {}); }

Var Tape::add(Var a, Var b) { return push(OpKind::Add, value(a) + value(b), {{a, 1.0}, {b, 1.0}}); }
Var Tape::sub(Var a, Var b) { return push(OpKind::Sub, value(a) - value(b), {{a, 1.0}, {b, -1.0}}); }
Var Tape::mul(Var a, Var b) {
    const double av = value(a), bv = value(b);
    return push(OpKind::Mul, av * bv, {{a, bv}, {b, av}});
}
Var Tape::div(Var a, Var b) {
    const double av = value(a), bv = value(b);
    return push(OpKind::Div, av / bv, {{a, 1.0 / bv}, {b, -av / (bv * bv)}});
}
Var Tape::neg(Var a) { return push(OpKind::Neg, -value(a), {{a, -1.0}}); }
Var Tape::scale(Var x, double a, double b) { return push(OpKind::Scale, a * value(x) + b, {{x, a}}); }

Var Tape::affine(std::span<const Var> xs, std::span<const double> weights, double bias) {
    if (xs.size() != weights.size()) throw StructuralError("affine: input/weight length mismatch");
    double acc = bias;
    const auto begin = static_cast<std::uint32_t>(parents_.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        acc += weights[i] * value(xs[i]);
        parents_.push_back(xs[i].index());
        partials_.push_back(weights[i]);
    }
    nodes_.push_back(Node{acc, begin, static_cast<std::uint32_t>(xs.size()), OpKind::Affine});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::sum(std::span<const Var> xs) {
    double acc = 0.0;
    const auto begin = static_cast<std::uint32_t>(parents_.size());
    for (const Var& x : xs) {
        acc += value(x);
        parents_.push_back(x.index());
        partials_.push_back(1.0);
    }
    nodes_.push_back(Node{acc, begin, static_cast<std::uint32_t>(xs.size()), OpKind::Sum});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::pow(Var x, double exponent) {
    const double xv = value(x);
    const double partial = exponent == 0.0 ? 0.0 : exponent * std::pow(xv, exponent - 1.0);
    return push(OpKind::Pow, std::pow(xv, exponent), {{x, partial}});
}

Var Tape::exp(Var x) {
    const double e = std::exp(value(x));
    return push(OpKind::Exp, e, {{x, e}});
}

Var Tape::sin(Var x) {
    const double xv = value(x);
    return push(OpKind::Sin, std::sin(xv), {{x, std::cos(xv)}});
}

Var Tape::tanh(Var x) {
    const double t = std::tanh(value(x));
    return push(OpKind::Tanh, t, {{x, 1.0 - t * t}});
}

Var Tape::relu(Var x) {
    const double xv = value(x);
    note_kink(std::abs(xv));
    return push(OpKind::Relu, xv > 0.0 ? xv : 0.0, {{x, xv > 0.0 ? 1.0 : 0.0}});
}

Var Tape::abs(Var x) {
    const double xv = value(x);
    note_kink(std::abs(xv));
    const double slope = xv > 0.0 ? 1.0 : (xv < 0.0 ? -1.0 : 0.0);
    return push(OpKind::Abs, std::abs(xv), {{x, slope}});
}

Var Tape::clamp(Var x, double lo, double hi) {
    const double xv = value(x);
    note_kink(std::min(std::abs(xv - lo), std::abs(xv - hi)));
    const bool inside = xv > lo && xv < hi;
    return push(OpKind::Clamp, std::clamp(xv, lo, hi), {{x, inside ? 1.0 : 0.0}});
}

Var Tape::custom(std::span<const Var> parents, double value, std::span<const double> partials) {
    if (parents.size() != partials.size()) throw StructuralError("custom: parent/partial length mismatch");
    const auto begin = static_cast<std::uint32_t>(parents_.size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
        parents_.push_back(parents[i].index());
        partials_.push_back(partials[i]);
    }
    nodes_.push_back(Node{value, begin, static_cast<std::uint32_t>(parents.size()), OpKind::Custom});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

std::vector<double> Tape::gradient(Var output, std::span<const Var> wrt) const {
    if (output.tape() != this) throw ArgumentError("gradient: output belongs to a different tape");
    const std::size_t last = output.index();
    for (std::size_t i = 0; i <= last; ++i) {
        const Node& n = nodes_[i];
        bool finite = std::isfinite(n.value);
        for (std::uint32_t e = 0; finite && e < n.edge_count; ++e) finite = std::isfinite(partials_[n.edge_begin + e]);
        if (!finite) {
            throw NumericalError("non-finite intermediate at tape node #" + std::to_string(i) + " (" + to_string(n.op) +
                                 ", value " + std::to_string(n.value) + ")");
        }
    }

    std::vector<double> adjoint(last + 1, 0.0);
    adjoint[last] = 1.0;
    for (std::size_t i = last + 1; i-- > 0;) {
        const double a = adjoint[i];
        if (a == 0.0) continue;
        const Node& n = nodes_[i];
        for (std::uint32_t e = n.edge_begin; e < n.edge_begin + n.edge_count; ++e) {
            adjoint[parents_[e]] += a * partials_[e];
        }
    }

    std::vector<double> out(wrt.size(), 0.0);
    for (std::size_t k = 0; k < wrt.size(); ++k) {
        if (wrt[k].tape() != this) throw ArgumentError("gradient: parameter belongs to a different tape");
        if (wrt[k].index() <= last) out[k] = adjoint[wrt[k].index()];
    }
    return out;
}

Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
Var operator/(Var a, Var b) { return a.tape()->div(a, b); }
Var operator-(Var a) { return a.tape()->neg(a); }
Var operator+(Var a, double b) { return a.tape()->scale(a, 1.0, b); }
Var operator+(double a, Var b) { return b.tape()->scale(b, 1.0, a); }
Var operator-(Var a, double b) { return a.tape()->scale(a, 1.0, -b); }
Var operator-(double a, Var b) { return b.tape()->scale(b, -1.0, a); }
Var operator*(Var a, double b) { return a.tape()->scale(a, b); }
Var operator*(double a, Var b) { return b.tape()->scale(b, a); }
Var operator/(Var a, double b) { return a.tape()->scale(a, 1.0 / b); }

Var tanh(Var x) { return x.tape()->tanh(x); }
Var exp(Var x) { return x.tape()->exp(x); }
Var sin(Var x) { return x.tape()->sin(x); }
Var relu(Var x) { return x.tape()->relu(x); }
Var abs(Var x) { return x.tape()->abs(x); }
Var pow(Var x, double exponent) { return x.tape()->pow(x, exponent); }

bool Bounds::bounded() const noexcept { return std::isfinite(lower) || std::isfinite(upper); }
double Bounds::project(double x) const noexcept { return std::min(std::max(x, lower), upper); }

void ParamSet::add(std::string name, std::span<const double> values, std::span<const Bounds> bounds) {
    if (!bounds.empty() && bounds.size() != values.size()) throw StructuralError("ParamSet::add: bounds length mismatch");
    for (const auto& s : slices_) {
        if (s.name == name) throw StructuralError("ParamSet::add: duplicate slice '" + name + "'");
    }
    slices_.push_back(ParamSlice{std::move(name), values_.size(), values.size()});
    values_.insert(values_.end(), values.begin(), values.end());
    if (bounds.empty()) {
        bounds_.resize(values_.size());
    } else {
        bounds_.insert(bounds_.end(), bounds.begin(), bounds.end());
    }
}

void ParamSet::add(std::string name, double value, Bounds bounds) {
    add(std::move(name), std::span<const double>(&value, 1), std::span<const Bounds>(&bounds, 1));
}

const ParamSlice& ParamSet::slice(std::string_view name) const {
    for (const auto& s : slices_) {
        if (s.name == name) return s;
    }
    throw ArgumentError("ParamSet: no slice named '" + std::string(name) + "'");
}

std::span<const double> ParamSet::values_of(std::string_view name) const {
    const auto& s = slice(name);
    return std::span<const double>(values_).subspan(s.offset, s.size);
}

void ParamSet::project() noexcept {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = bounds_[i].project(values_[i]);
}

bool ParamSet::feasible() const noexcept {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] < bounds_[i].lower || values_[i] > bounds_[i].upper) return false;
    }
    return true;
}

std::vector<Var> ParamSet::bind(Tape& tape) const { return tape.variables(values_); }

std::vector<double> grad(Var loss, std::span<const Var> params) {
    if (loss.tape() == nullptr) throw ArgumentError("grad: loss is not attached to a tape");
    return loss.tape()->gradient(loss, params);
}

double relative_error(double a, double b) noexcept {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

FdReport finite_difference_check(const TapedFunction& f, std::span<const double> params, double h, double tolerance,
                                 double kink_tolerance) {
    if (!(h > 0.0)) throw ArgumentError("finite_difference_check: step h must be > 0");

    FdReport report;
    std::vector<double> autodiff_grad;
    {
        Tape tape;
        auto vars = tape.variables(params);
        Var out = f(tape, vars);
        if (tape.min_kink_distance() < kink_tolerance) {
            report.skipped = true;
            report.passed = true;
            report.note = "non-differentiable point skipped";
            return report;
        }
        autodiff_grad = tape.gradient(out, vars);
    }

    auto evaluate = [&](std::span<const double> x) {
        Tape tape;
        auto vars = tape.variables(x);
        return f(tape, vars).value();
    };

    std::vector<double> x(params.begin(), params.end());
    report.passed = true;
    report.components.reserve(params.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = evaluate(x);
        x[i] = x0 - h;
        const double fm = evaluate(x);
        x[i] = x0;

        FdComponent c;
        c.autodiff = autodiff_grad[i];
        c.finite_difference = (fp - fm) / (2.0 * h);
        c.relative_error = relative_error(c.autodiff, c.finite_difference);
        c.passed = c.relative_error < tolerance;
        report.max_relative_error = std::max(report.max_relative_error, c.relative_error);
        report.passed = report.passed && c.passed;
        report.components.push_back(c);
    }
    return report;
}

}  // namespace akan

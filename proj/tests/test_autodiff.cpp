#include <cmath>
#include <random>
#include <string>

#include "akan/autodiff.hpp"
#include "akan/errors.hpp"
#include "akan/surrogate.hpp"
#include "doctest.h"

using namespace akan;

TEST_CASE("polynomial and tanh gradients") {
    Tape t;
    Var p = t.variable(3.0);
    Var loss = p * p;
    CHECK(grad(loss, std::span<const Var>(&p, 1))[0] == 6.0);

    Tape t2;
    Var q = t2.variable(0.0);
    Var y = tanh(q);
    CHECK(grad(y, std::span<const Var>(&q, 1))[0] == 1.0);
}

TEST_CASE("every primitive matches its closed-form derivative") {
    const double x = 0.37;
    auto d = [&](auto&& make) {
        Tape t;
        Var v = t.variable(x);
        Var y = make(t, v);
        return t.gradient(y, std::span<const Var>(&v, 1))[0];
    };
    CHECK(d([](Tape&, Var v) { return exp(v); }) == doctest::Approx(std::exp(x)));
    CHECK(d([](Tape&, Var v) { return sin(v); }) == doctest::Approx(std::cos(x)));
    CHECK(d([](Tape&, Var v) { return pow(v, 3.0); }) == doctest::Approx(3 * x * x));
    CHECK(d([](Tape&, Var v) { return pow(v, -1.0); }) == doctest::Approx(-1.0 / (x * x)));
    CHECK(d([](Tape&, Var v) { return v / 4.0 - 2.0; }) == doctest::Approx(0.25));
    CHECK(d([](Tape&, Var v) { return -v; }) == -1.0);
    CHECK(d([](Tape&, Var v) { return relu(v); }) == 1.0);
    CHECK(d([](Tape&, Var v) { return relu(-v); }) == 0.0);
    CHECK(d([](Tape&, Var v) { return abs(-v); }) == 1.0);
    CHECK(d([](Tape& t, Var v) { return t.scale(v, 2.5, 1.0); }) == 2.5);
    CHECK(d([](Tape& t, Var v) { return t.clamp(v, -1.0, 1.0); }) == 1.0);
    CHECK(d([](Tape& t, Var v) { return t.clamp(v, 0.5, 1.0); }) == 0.0);
}

TEST_CASE("affine, sum and custom nodes accumulate partials") {
    Tape t;
    auto xs = t.variables(std::vector<double>{1.0, 2.0, 3.0});
    const std::vector<double> w{0.5, -1.0, 2.0};
    Var a = t.affine(xs, w, 0.25);
    CHECK(a.value() == doctest::Approx(0.5 - 2.0 + 6.0 + 0.25));
    Var s = t.sum(xs);
    const std::vector<double> partial{3.0, -2.0};
    const std::vector<Var> parents{a, s};
    Var c = t.custom(parents, 42.0, partial);
    auto g = t.gradient(c, xs);
    CHECK(g[0] == doctest::Approx(3 * 0.5 - 2));
    CHECK(g[1] == doctest::Approx(3 * -1.0 - 2));
    CHECK(g[2] == doctest::Approx(3 * 2.0 - 2));
}

TEST_CASE("shared subexpressions add their adjoints") {
    Tape t;
    Var x = t.variable(2.0);
    Var y = x * x + x * 3.0;  // dy/dx = 2x + 3
    CHECK(t.gradient(y, std::span<const Var>(&x, 1))[0] == 7.0);
}

TEST_CASE("non-finite intermediate names the first offending node") {
    Tape t;
    Var x = t.variable(-1.0);
    Var ok = x * 2.0;
    Var bad = pow(ok, 0.5);  // node 2
    Var out = bad + 1.0;
    try {
        (void)t.gradient(out, std::span<const Var>(&x, 1));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("#" + std::to_string(bad.index())) != std::string::npos);
        CHECK(msg.find("pow") != std::string::npos);
    }
}

TEST_CASE("device MSE gradient matches central differences") {
    auto device = AnalyticDevice::generate(11);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    std::vector<std::array<double, kElectrodes>> offsets(10);
    for (auto& o : offsets)
        for (auto& x : o) x = u(rng);
    std::vector<double> base(kElectrodes);
    for (auto& x : base) x = u(rng);

    TapedFunction f = [&](Tape& t, std::span<const Var> p) {
        std::vector<Var> sq;
        for (const auto& o : offsets) {
            std::array<Var, kElectrodes> v;
            for (std::size_t e = 0; e < kElectrodes; ++e) v[e] = p[e] + o[e];
            Var i = device->record(t, v);
            sq.push_back(i * i);
        }
        return t.sum(sq) / static_cast<double>(offsets.size());
    };
    auto report = finite_difference_check(f, base, 1e-5, 1e-6);
    CHECK_FALSE(report.skipped);
    CHECK(report.components.size() == kElectrodes);
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-6);
}

TEST_CASE("finite_difference_check basics") {
    const std::vector<double> one{0.5};
    auto id = finite_difference_check([](Tape&, std::span<const Var> p) { return p[0]; }, one, 1e-5, 1e-9);
    CHECK(id.passed);
    CHECK(id.max_relative_error < 1e-10);

    auto s = finite_difference_check([](Tape&, std::span<const Var> p) { return sin(p[0]); }, one, 1e-5, 1e-8);
    const double fd = (std::sin(0.5 + 1e-5) - std::sin(0.5 - 1e-5)) / 2e-5;
    CHECK(std::abs(std::cos(0.5) - fd) / std::cos(0.5) < 1e-8);
    CHECK(s.passed);

    const std::vector<double> zero{0.0};
    auto k = finite_difference_check([](Tape&, std::span<const Var> p) { return relu(p[0]); }, zero, 1e-5, 1e-8);
    CHECK(k.skipped);
    CHECK(k.note == "non-differentiable point skipped");

    CHECK_THROWS_AS(finite_difference_check([](Tape&, std::span<const Var> p) { return p[0]; }, one, 0.0, 1e-8),
                    ArgumentError);
    CHECK_THROWS_AS(finite_difference_check([](Tape&, std::span<const Var> p) { return p[0]; }, one, -1e-5, 1e-8),
                    ArgumentError);
}

TEST_CASE("relative_error conventions") {
    CHECK(relative_error(0.0, 0.0) == 0.0);
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == 0.5);
}

TEST_CASE("ParamSet slices, bounds and projection") {
    ParamSet ps;
    const std::vector<double> c{0.2, 1.5, -3.0};
    const std::vector<Bounds> b{{-1, 1}, {-1, 1}, {-1, 1}};
    ps.add("control", c, b);
    ps.add("gain", 4.0);
    CHECK(ps.size() == 4);
    CHECK(ps.slice("gain").offset == 3);
    CHECK(ps.values_of("control").size() == 3);
    CHECK_FALSE(ps.feasible());
    ps.project();
    CHECK(ps.feasible());
    CHECK(ps.values()[1] == 1.0);
    CHECK(ps.values()[2] == -1.0);
    CHECK(ps.values()[3] == 4.0);
    CHECK_THROWS_AS(ps.slice("missing"), ArgumentError);

    Tape t;
    auto leaves = ps.bind(t);
    REQUIRE(leaves.size() == 4);
    CHECK(leaves[3].value() == 4.0);
}

TEST_CASE("tape clear keeps nothing") {
    Tape t;
    Var x = t.variable(1.0);
    (void)relu(x);
    CHECK(t.size() == 2);
    CHECK(t.min_kink_distance() == 1.0);
    t.clear();
    CHECK(t.size() == 0);
    CHECK(std::isinf(t.min_kink_distance()));
}

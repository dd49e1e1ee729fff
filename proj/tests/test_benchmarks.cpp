#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "akan/benchmarks.hpp"
#include "doctest.h"

using namespace akan;
using std::numbers::pi;

namespace {

using Big = boost::multiprecision::cpp_dec_float_50;

// direct series in 50 digits: every term from its closed form, no recurrence
double j0_oracle(double x) {
    const Big half = Big(x) / 2;
    Big sum = 0;
    Big fact = 1;
    for (int m = 0; m <= 80; ++m) {
        if (m > 0) fact *= m;
        Big term = boost::multiprecision::pow(half, 2 * m) / (fact * fact);
        sum += (m % 2 == 0) ? term : Big(-term);
    }
    return static_cast<double>(sum);
}

double sample_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("bessel_j0 against high-precision oracles") {
    CHECK(bessel_j0(0.0) == 1.0);
    CHECK(std::abs(bessel_j0(2.404825557695773)) < 1e-8);
    CHECK(std::abs(bessel_j0(20.0) - j0_oracle(20.0)) < 1e-7);
    CHECK(std::abs(bessel_j0(20.0) - std::cyl_bessel_j(0.0, 20.0)) < 1e-7);
    for (int i = 0; i <= 100; ++i) {
        const double x = 0.2 * i;
        REQUIRE(std::abs(bessel_j0(x) - j0_oracle(x)) < 1e-7);
        REQUIRE(std::abs(bessel_j0(x) - std::cyl_bessel_j(0.0, x)) < 1e-7);
    }
    CHECK(bessel_j0(-3.0) == bessel_j0(3.0));
    CHECK_THROWS_AS(bessel_j0(25.5), DomainError);
    CHECK_THROWS_AS(bessel_j0(-26.0), DomainError);
    CHECK_NOTHROW(bessel_j0(25.0));
}

TEST_CASE("bessel partial sums follow the series") {
    const double x = 1.3;
    const double q = (x / 2) * (x / 2);
    CHECK(bessel_j0_partial(x, 0) == 1.0);
    CHECK(bessel_j0_partial(x, 1) == doctest::Approx(1.0 - q));
    CHECK(bessel_j0_partial(x, 2) == doctest::Approx(1.0 - q + q * q / 4.0));
}

TEST_CASE("regression targets") {
    auto t2 = regression_task("exp2");
    CHECK(t2.arity == 2);
    CHECK(t2.target(std::vector<double>{0.0, 0.0}) == 1.0);
    CHECK(t2.target(std::vector<double>{0.5, 1.0}) == doctest::Approx(std::exp(2.0)).epsilon(1e-15));
    auto t4 = regression_task("exp4");
    CHECK(t4.target(std::vector<double>{0, 0, 0, 0}) == 1.0);
    auto s = regression_task("sine");
    CHECK(s.target(std::vector<double>{0.25}) == doctest::Approx(1.0));
    auto b = regression_task("bessel");
    CHECK(b.target(std::vector<double>{0.5}) == bessel_j0(10.0));
    CHECK_THROWS_AS(regression_task("cosine"), ArgumentError);
    CHECK(regression_task_names().size() == 4);
}

TEST_CASE("target_eval normalizes by batch min/max") {
    auto t = regression_task("sine");
    const std::vector<double> x{0.0, 0.25, 0.75, 0.1};
    auto tb = target_eval(t, x, 1);
    REQUIRE(tb.raw.size() == 4);
    CHECK(tb.normalized[1] == 1.0);
    CHECK(tb.normalized[2] == -1.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(tb.map.invert(tb.normalized[i]) == doctest::Approx(tb.raw[i]));
    CHECK_THROWS_AS(target_eval(t, x, 2), StructuralError);

    auto rd = make_regression_data(regression_task("exp2"), 100, 3);
    CHECK(rd.data.size() == 100);
    CHECK(rd.data.n_features == 2);
    for (double v : rd.data.features) CHECK((v >= 0.0 && v <= 1.0));
    auto again = make_regression_data(regression_task("exp2"), 100, 3);
    CHECK(again.data.features == rd.data.features);
}

TEST_CASE("moons") {
    auto clean = make_moons(400, 0.0, 1);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double x = clean.features[2 * i], y = clean.features[2 * i + 1];
        if (clean.labels[i] == 0) CHECK(std::abs(x * x + y * y - 1.0) < 1e-12);
        else CHECK(std::abs((x - 1) * (x - 1) + (y - 0.5) * (y - 0.5) - 1.0) < 1e-12);
    }
    auto hundred = make_moons(100, 0.05, 2);
    int ones = 0;
    for (int l : hundred.labels) ones += l;
    CHECK(ones == 50);
    CHECK_THROWS_AS(make_moons(101, 0.1, 0), ArgumentError);
    CHECK_THROWS_AS(make_moons(100, -0.1, 0), ArgumentError);

    // radial offset from each arc's centre carries the per-coordinate noise
    auto noisy = make_moons(2000, 0.05, 3);
    std::vector<double> residual;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const double x = noisy.features[2 * i], y = noisy.features[2 * i + 1];
        const double cx = noisy.labels[i] ? 1.0 : 0.0, cy = noisy.labels[i] ? 0.5 : 0.0;
        residual.push_back(std::hypot(x - cx, y - cy) - 1.0);
    }
    const double sd = sample_std(residual);
    CHECK(sd >= 0.04);
    CHECK(sd <= 0.06);
}

TEST_CASE("spirals") {
    auto clean = make_spirals(400, 1.5, 0.0, 1);
    double max_angle[2] = {0, 0};
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double x = clean.features[2 * i], y = clean.features[2 * i + 1];
        const double r = std::hypot(x, y);
        const double theta = 2 * pi * 1.5 * r + clean.labels[i] * pi;
        CHECK(std::abs(x - r * std::cos(theta)) < 1e-12);
        CHECK(std::abs(y - r * std::sin(theta)) < 1e-12);
        CHECK(r >= 0.1);
        CHECK(r <= 1.0);
        max_angle[clean.labels[i]] = std::max(max_angle[clean.labels[i]], 2 * pi * 1.5 * r);
    }
    CHECK(max_angle[0] > 0.99 * 3 * pi);
    CHECK(max_angle[0] <= 3 * pi);
    auto one = make_spirals(400, 1.0, 0.0, 1);
    double extent = 0.0;
    for (std::size_t i = 0; i < one.size(); ++i)
        extent = std::max(extent, 2 * pi * std::hypot(one.features[2 * i], one.features[2 * i + 1]));
    CHECK(extent > 0.99 * 2 * pi);
    CHECK(extent <= 2 * pi);
    CHECK_THROWS_AS(make_spirals(100, 0.0, 1.0, 0), ArgumentError);

    // RMS distance to the noise-free curve of the point's class
    const double turns = 1.0;
    auto noisy = make_spirals(4000, turns, 1.0, 4);
    std::vector<std::array<double, 2>> curve[2];
    for (int k = 0; k < 2; ++k)
        for (int s = 0; s <= 20000; ++s) {
            const double r = 0.1 + 0.9 * s / 20000.0;
            const double th = 2 * pi * turns * r + k * pi;
            curve[k].push_back({r * std::cos(th), r * std::sin(th)});
        }
    double sq[2] = {0, 0};
    int count[2] = {0, 0};
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const double x = noisy.features[2 * i], y = noisy.features[2 * i + 1];
        const int k = noisy.labels[i];
        double best = 1e9;
        for (const auto& p : curve[k]) best = std::min(best, (x - p[0]) * (x - p[0]) + (y - p[1]) * (y - p[1]));
        sq[k] += best;
        ++count[k];
    }
    for (int k = 0; k < 2; ++k) {
        CHECK(count[k] == 2000);
        const double rms = std::sqrt(sq[k] / count[k]);
        CHECK(rms >= 0.02);
        CHECK(rms <= 0.03);
    }
}

TEST_CASE("tabular loading") {
    TabularSchema s = TabularSchema::from_json(R"({"delimiter": ",", "header": true,
        "features": ["a", "b"], "label": "cls", "positive": ["yes"]})");
    std::istringstream in("a,cls,b\n1,yes,10\n3,no,-2\n\n2,yes,4\n-1,no,0\n");
    auto d = load_tabular(in, s);
    CHECK(d.size() == 4);
    CHECK(d.n_features == 2);
    CHECK(d.labels == std::vector<int>{1, 0, 1, 0});
    CHECK(d.features[1] == 10.0);

    const Interval v{-1.2, 0.8};
    auto c = make_classification_data(d, v, 0.5, 1);
    CHECK(c.raw_ranges[0].lo == -1.0);
    CHECK(c.raw_ranges[0].hi == 3.0);
    std::set<double> col0;
    auto collect = [&](const Dataset& ds) {
        for (std::size_t i = 0; i < ds.size(); ++i) col0.insert(ds.row(i)[0]);
        for (double t : ds.targets) CHECK((t == 1.0 || t == -1.0));
    };
    collect(c.train);
    collect(c.validation);
    CHECK(*col0.begin() == -1.2);
    CHECK(*col0.rbegin() == 0.8);

    TabularSchema tsv = TabularSchema::from_json(R"({"delimiter": "tab", "columns": ["x", "y", "label"],
        "features": ["x", "y"], "label": "label"})");
    std::istringstream t("0.5\t1\t2\n0.1\t0\t1\n");
    auto td = load_tabular(t, tsv);
    CHECK(td.labels == std::vector<int>{1, 1});
}

TEST_CASE("tabular errors carry coordinates") {
    TabularSchema s = TabularSchema::from_json(R"({"header": true, "features": ["a", "b"], "label": "cls"})");
    auto err = [&](const std::string& text) {
        std::istringstream in(text);
        try {
            load_tabular(in, s);
        } catch (const ParseError& e) {
            return e;
        }
        FAIL("expected ParseError");
        return ParseError(ParseErrorKind::Syntax, "");
    };
    auto missing = err("a,cls\n1,0\n");
    CHECK(missing.kind() == ParseErrorKind::MissingColumn);
    auto nonnum = err("a,b,cls\n1,2,1\n3,x,0\n");
    CHECK(nonnum.kind() == ParseErrorKind::NonNumeric);
    CHECK(nonnum.line() == 3);
    CHECK(nonnum.column() == 2);
    auto shortrow = err("a,b,cls\n1,2\n");
    CHECK(shortrow.kind() == ParseErrorKind::MissingColumn);
    CHECK(shortrow.line() == 2);
    CHECK(err("").kind() == ParseErrorKind::EmptyFile);
    CHECK(err("a,b,cls\n").kind() == ParseErrorKind::EmptyFile);
    CHECK_THROWS_AS(TabularSchema::from_json("{\"label\": \"c\"}"), ParseError);
}

TEST_CASE("splits") {
    auto s = split_indices(10, 0.8, 5);
    CHECK(s.train.size() == 8);
    CHECK(s.validation.size() == 2);
    auto again = split_indices(10, 0.8, 5);
    CHECK(s.train == again.train);
    CHECK(s.validation == again.validation);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.validation.begin(), s.validation.end());
    CHECK(all.size() == 10);
    CHECK_THROWS_AS(split_indices(10, 1.0, 0), ArgumentError);
}

TEST_CASE("dataset CSV round trip") {
    auto rd = make_regression_data(regression_task("exp2"), 20, 1);
    std::stringstream ss;
    write_dataset_csv(rd.data, ss);
    auto back = read_dataset_csv(ss);
    CHECK(back.n_features == 2);
    CHECK(back.features == rd.data.features);
    CHECK(back.targets == rd.data.targets);
    std::istringstream bad("x0,y\n1,2\n1,zz\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), ParseError);
}

TEST_CASE("mlp parameter counting") {
    CHECK(mlp_param_count(std::vector<std::size_t>{2, 5, 1}) == 21);
    CHECK(mlp_param_count(std::vector<std::size_t>{1, 1}) == 2);
    CHECK(mlp_param_count(std::vector<std::size_t>{4, 10, 10, 1}) == 50 + 110 + 11);
}

TEST_CASE("batched MLP gradient matches the scalar tape") {
    for (auto act : {Activation::Tanh, Activation::Relu}) {
        MlpBaseline b{{2, 4, 3, 1}, act};
        auto rd = make_regression_data(regression_task("exp2"), 12, 2);
        auto m = mlp_init(b, rd.data.feature_ranges, 3);
        for (std::size_t i = 0; i < m.params.size(); ++i) m.params[i] += 0.01 * static_cast<double>(i % 5);
        auto p = make_mlp_problem(m, rd.data, TrainConfig{});
        std::vector<std::size_t> batch(rd.data.size());
        for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
        std::vector<double> g(m.params.size());
        auto ev = p.loss_grad(m.params, batch, g);

        Tape t;
        auto w = t.variables(m.params);
        std::vector<Var> sq;
        for (std::size_t s = 0; s < rd.data.size(); ++s) {
            std::vector<Var> h;
            for (double x : rd.data.row(s)) h.push_back(t.constant(2.0 * x - 1.0));
            std::size_t off = 0;
            for (std::size_t l = 0; l + 1 < b.widths.size(); ++l) {
                std::vector<Var> next;
                for (std::size_t o = 0; o < b.widths[l + 1]; ++o) {
                    Var z = w[off + b.widths[l] * b.widths[l + 1] + o];
                    for (std::size_t i = 0; i < b.widths[l]; ++i) z = z + w[off + o * b.widths[l] + i] * h[i];
                    const bool hidden = l + 2 < b.widths.size();
                    next.push_back(!hidden ? z : act == Activation::Tanh ? tanh(z) : relu(z));
                }
                off += b.widths[l] * b.widths[l + 1] + b.widths[l + 1];
                h = next;
            }
            Var d = h[0] - rd.data.targets[s];
            sq.push_back(d * d);
        }
        Var loss = t.sum(sq) / static_cast<double>(sq.size());
        CHECK(loss.value() == doctest::Approx(ev.data_loss).epsilon(1e-12));
        auto tg = t.gradient(loss, w);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - tg[i]) < 1e-12);
    }
}

TEST_CASE("linear MLP learns y = 2x") {
    Dataset d;
    d.n_features = 1;
    for (int i = 0; i <= 50; ++i) {
        d.features.push_back(i / 50.0);
        d.targets.push_back(2.0 * i / 50.0);
    }
    d.feature_ranges = {Interval{0.0, 1.0}};
    TrainConfig c;
    c.learning_rate = 5e-2;
    c.epochs = 500;
    auto r = mlp_baseline_train(MlpBaseline{{1, 1}, Activation::Tanh}, d, c);
    CHECK(r.report.best_mse < 1e-6);
    CHECK(r.model.forward(std::vector<double>{0.5})[0] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("tanh MLP fits the two-variable target") {
    auto rd = make_regression_data(regression_task("exp2"), 500, 1);
    TrainConfig c;
    c.epochs = 2000;
    c.plateau_epochs = 0;
    c.seed = 0;
    auto r = mlp_baseline_train(MlpBaseline{{2, 100, 1}, Activation::Tanh}, rd.data, c);
    CHECK(r.report.best_mse <= 1e-3);
}

TEST_CASE("named grids") {
    auto g = named_grid("tables1-fig2d");
    CHECK(g.task == "bessel");
    CHECK(g.cells.size() == 10);
    CHECK(g.cells[0].network() == "[1,1]x5");
    CHECK(g.cells[9].network() == "[1,1]x50");
    CHECK(named_grid("tables2-fig2e").cells.size() == 18);
    CHECK(named_grid("tables2-fig2e").cells[0].network() == "[2,5,1]");
    CHECK(named_grid("tables1-fig2e").cells.size() == 50);
    CHECK(named_grid("tables1-fig2f").cells.size() == 33);
    CHECK_THROWS_AS(named_grid("nope"), ArgumentError);
    for (const auto& n : named_grid_names()) CHECK_NOTHROW(named_grid(n));
}

TEST_CASE("sweep of one cell and five seeds") {
    SweepGrid g{"tiny", "sine", {SweepCell{Family::Akan, {1, 1}, 1}}};
    SweepOptions o;
    o.train.epochs = 5;
    o.samples = 40;
    std::size_t seen = 0;
    o.progress = [&](const SweepRow&) { ++seen; };
    auto rows = sweep(regression_task("sine"), g, AnalyticDevice::generate(1), o);
    REQUIRE(rows.size() == 6);
    CHECK(seen == 5);
    double best = 1e9;
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(rows[i].seed == static_cast<std::uint64_t>(i));
        CHECK(rows[i].params == 7);
        best = std::min(best, rows[i].mse);
    }
    CHECK_FALSE(rows[5].seed);
    CHECK(rows[5].mse == best);
    CHECK(*rows[5].top5_min == best);
    CHECK(*rows[5].top5_max >= best);

    o.workers = 3;
    o.progress = {};
    auto parallel = sweep(regression_task("sine"), g, AnalyticDevice::generate(1), o);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(parallel[i].mse == rows[i].mse);

    std::stringstream ss;
    write_sweep_csv(rows, ss);
    auto back = read_sweep_csv(ss);
    REQUIRE(back.size() == 6);
    CHECK(back[0].network == "[1,1]x1");
    CHECK(back[0].row == "run");
    CHECK(back[5].row == "summary");
    CHECK(back[5].seed.empty());
    CHECK(back[2].mse == rows[2].mse);

    SweepGrid wrong{"bad", "sine", {SweepCell{Family::Akan, {2, 1}, 1}}};
    CHECK_THROWS_AS(sweep(regression_task("sine"), wrong, AnalyticDevice::generate(1), o), StructuralError);
}

TEST_CASE("mlp family sweep") {
    SweepGrid g{"tiny", "exp2", {SweepCell{Family::MlpRelu, {2, 5, 1}, 0}}};
    SweepOptions o;
    o.train.epochs = 5;
    o.samples = 30;
    o.seeds = {0, 1};
    auto rows = sweep(regression_task("exp2"), g, AnalyticDevice::generate(1), o);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].params == 21);
}

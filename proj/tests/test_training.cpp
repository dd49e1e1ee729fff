#include <cmath>
#include <random>
#include <sstream>

#include "akan/benchmarks.hpp"
#include "akan/training.hpp"
#include "doctest.h"

using namespace akan;

namespace {

// objective sum (x - target)^2 over one scalar; gradient by hand
Problem quadratic(double start, double target, std::size_t samples = 1) {
    Problem p;
    p.initial.add("x", start);
    p.samples = samples;
    auto eval = [target](std::span<const double> x) {
        LossEval ev;
        ev.data_loss = (x[0] - target) * (x[0] - target);
        ev.objective = ev.data_loss;
        ev.metric = ev.data_loss;
        return ev;
    };
    p.loss_grad = [eval, target](std::span<const double> x, std::span<const std::size_t>, std::span<double> g) {
        g[0] = 2.0 * (x[0] - target);
        return eval(x);
    };
    p.evaluate = eval;
    return p;
}

Dataset sine_data(std::size_t n, std::uint64_t seed) {
    return make_regression_data(regression_task("sine"), n, seed).data;
}

}  // namespace

TEST_CASE("mse_loss") {
    const std::vector<double> a{1, 2, 3};
    CHECK(mse_loss(a, a) == 0.0);
    CHECK(mse_loss(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
    CHECK(mse_loss(a, std::vector<double>{2, 2, 5}) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(mse_loss(a, std::vector<double>{1}), ArgumentError);
    CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}), ArgumentError);

    Tape t;
    auto p = t.variables(a);
    const std::vector<double> y{2, 2, 5};
    Var l = mse_loss(t, p, y);
    CHECK(l.value() == doctest::Approx(5.0 / 3.0));
    auto g = t.gradient(l, p);
    // d/dp_i = 2 (p_i - y_i) / n
    CHECK(g[0] == doctest::Approx(-2.0 / 3.0));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == doctest::Approx(-4.0 / 3.0));
}

TEST_CASE("classification_metrics") {
    const std::vector<double> labels{1, -1, 1, -1};
    CHECK(classification_metrics(labels, labels) == 1.0);
    CHECK(classification_metrics(std::vector<double>(4, 0.0), labels) == 0.5);
    CHECK(classification_metrics(std::vector<double>{0.9, -0.2, 0.1}, std::vector<double>{1, 1, -1}) ==
          doctest::Approx(1.0 / 3.0));
    CHECK(classification_metrics(std::vector<double>{0.9, -0.2}, std::vector<double>{1, 0}) == 1.0);
    CHECK(classification_metrics(std::vector<double>{0.4, 0.6}, std::vector<double>{-1, 1}, 0.5) == 1.0);
}

TEST_CASE("adam_step hand arithmetic") {
    ParamSet p;
    p.add("w", 1.0);
    AdamState s(1);
    TrainConfig c;
    c.learning_rate = 0.1;
    const std::vector<double> g{2.0};  // d(w^2)/dw at 1
    adam_step(p, g, s, c);
    // m_hat = 2, v_hat = 4
    CHECK(p.values()[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
    CHECK(p.values()[0] == doctest::Approx(0.9).epsilon(1e-8));
    CHECK(s.t == 1);
    CHECK(s.m[0] == doctest::Approx(0.2));
    CHECK(s.v[0] == doctest::Approx(0.004));
}

TEST_CASE("adam_step with zero gradient leaves parameters unchanged") {
    ParamSet p;
    const std::vector<double> v{0.3, -0.7, 2.0};
    p.add("x", v);
    AdamState s(3);
    adam_step(p, std::vector<double>(3, 0.0), s, TrainConfig{});
    CHECK(std::vector<double>(p.values().begin(), p.values().end()) == v);
}

TEST_CASE("adam_step projects onto the box") {
    ParamSet p;
    p.add("control", 1.0, Bounds{-1.0, 1.0});
    AdamState s(1);
    for (int i = 0; i < 5; ++i) {
        adam_step(p, std::vector<double>{-3.0}, s, TrainConfig{});
        CHECK(p.values()[0] == 1.0);
    }
}

TEST_CASE("adam_step rejects non-finite gradients without touching state") {
    ParamSet p;
    p.add("a", 0.5);
    p.add("b", 0.25);
    AdamState s(2);
    try {
        adam_step(p, std::vector<double>{1.0, std::nan("")}, s, TrainConfig{});
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("(b)") != std::string::npos);
    }
    CHECK(s.t == 0);
    CHECK(s.m[0] == 0.0);
    CHECK(p.values()[0] == 0.5);
}

TEST_CASE("TrainConfig validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = TrainConfig{};
    c.restarts = 0;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = TrainConfig{};
    c.l1 = -1;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    CHECK(TrainConfig::classification().batch_size == 64);
    CHECK(TrainConfig::classification().epochs == 500);
    CHECK(TrainConfig::regression().epochs == 2000);
}

TEST_CASE("optimize conventions") {
    TrainConfig c;
    c.learning_rate = 0.1;
    c.epochs = 0;
    auto rep = optimize(quadratic(3.0, 1.0), c);
    CHECK(rep.trace.size() == 1);
    CHECK(rep.epochs_run == 0);
    CHECK(rep.best_params.values()[0] == 3.0);

    c.epochs = 500;
    rep = optimize(quadratic(3.0, 1.0), c);
    CHECK(rep.trace.size() == rep.epochs_run + 1);
    CHECK(rep.best_loss < 1e-6);
    CHECK(rep.trace[rep.best_epoch].loss == rep.best_loss);
    for (std::size_t i = 0; i < rep.trace.size(); ++i) CHECK(rep.trace[i].epoch == i);
}

TEST_CASE("plateau stop") {
    Problem flat = quadratic(0.0, 0.0);
    flat.loss_grad = [](std::span<const double>, std::span<const std::size_t>, std::span<double> g) {
        g[0] = 0.0;
        return LossEval{1.0, 1.0, 1.0};
    };
    TrainConfig c;
    c.epochs = 1000;
    auto rep = optimize(flat, c);
    CHECK(rep.plateau_stopped);
    CHECK(rep.epochs_run == 200);
    CHECK(rep.best_epoch == 0);

    c.plateau_epochs = 0;
    rep = optimize(flat, c);
    CHECK_FALSE(rep.plateau_stopped);
    CHECK(rep.epochs_run == 1000);
}

TEST_CASE("divergence stops early and keeps the best state") {
    // objective e^x, gradient sign flipped so Adam climbs
    Problem p = quadratic(0.0, 0.0);
    auto eval = [](std::span<const double> x) { return LossEval{std::exp(x[0]), std::exp(x[0]), std::exp(x[0])}; };
    p.loss_grad = [eval](std::span<const double> x, std::span<const std::size_t>, std::span<double> g) {
        g[0] = -std::exp(x[0]);
        return eval(x);
    };
    p.evaluate = eval;
    TrainConfig c;
    c.learning_rate = 0.5;
    c.epochs = 1000;
    auto rep = optimize(p, c);
    CHECK(rep.diverged);
    CHECK(rep.epochs_run < 100);
    CHECK(rep.best_epoch == 0);
    CHECK(rep.best_params.values()[0] == 0.0);
    CHECK_FALSE(rep.note.empty());
}

TEST_CASE("mini-batch path records one full evaluation per epoch") {
    TrainConfig c;
    c.learning_rate = 0.05;
    c.epochs = 50;
    c.batch_size = 3;
    c.plateau_epochs = 0;
    auto rep = optimize(quadratic(2.0, -1.0, 10), c);
    CHECK(rep.trace.size() == 51);
    CHECK(rep.best_loss < rep.trace[0].loss);
}

TEST_CASE("constant target with only the readout offset trainable") {
    auto dev = AnalyticDevice::generate(0);
    auto m = random_init(Topology::parse("[1,1]x1"), dev, 0);
    m.params.readout_gain[0] = 0.0;
    m.params.readout_offset[0] = 0.5;
    m.trainable = TrainableGroups::only({ParamGroup::ReadoutOffset});
    Dataset d;
    d.n_features = 1;
    for (int i = 0; i < 20; ++i) {
        d.features.push_back(-1.0 + 0.1 * i);
        d.targets.push_back(0.0);
    }
    TrainConfig c;
    c.learning_rate = 0.05;
    c.epochs = 100;
    auto r = train(m, d, c);
    CHECK(trainable_parameter_count(r.model) == 1);
    CHECK(r.report.trace.front().loss == doctest::Approx(0.25));
    CHECK(r.report.best_loss < 1e-4);
}

TEST_CASE("training is deterministic for a fixed seed") {
    auto dev = AnalyticDevice::generate(1);
    auto data = sine_data(100, 3);
    TrainConfig c;
    c.epochs = 60;
    c.seed = 4;
    auto topo = Topology::parse("[1,1]x2");
    auto a = multi_restart(topo, dev, data, c);
    auto b = multi_restart(topo, dev, data, c);
    std::ostringstream sa, sb;
    write_trace_csv(a.best().report, sa);
    write_trace_csv(b.best().report, sb);
    CHECK(sa.str() == sb.str());
    CHECK(a.runs.size() == 1);
    CHECK(a.top_k == 1);
    CHECK(a.spread == 0.0);
    CHECK(a.envelope_lo == a.envelope_hi);
}

TEST_CASE("trace CSV format") {
    TrainConfig c;
    c.epochs = 2;
    c.learning_rate = 0.1;
    auto rep = optimize(quadratic(1.0, 0.0), c);
    std::ostringstream out;
    write_trace_csv(rep, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,loss,mse,metric");
    std::getline(in, line);
    CHECK(line == "0,1,1,1");
    std::size_t rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("restarts: identical seeds give zero spread, ordering holds") {
    auto dev = AnalyticDevice::generate(1);
    auto data = sine_data(80, 2);
    TrainConfig c;
    c.epochs = 40;
    auto topo = Topology::parse("[1,1]x2");
    const std::vector<std::uint64_t> same(5, 7);
    auto r = multi_restart(topo, dev, data, c, same);
    CHECK(r.top_k == 5);
    CHECK(r.spread == 0.0);

    c.restarts = 10;
    auto ten = multi_restart(topo, dev, data, c);
    CHECK(ten.runs.size() == 10);
    double top5_max = 0.0;
    for (std::size_t i = 0; i < 5; ++i) top5_max = std::max(top5_max, ten.runs[i].report.best_mse);
    CHECK(top5_max >= ten.best().report.best_mse);
    for (std::size_t i = 1; i < ten.runs.size(); ++i)
        CHECK(ten.runs[i - 1].report.best_loss <= ten.runs[i].report.best_loss);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(ten.envelope_lo[i] <= ten.envelope_hi[i]);
}

TEST_CASE("short sine fit improves on the initial model") {
    auto dev = AnalyticDevice::generate(1);
    auto data = sine_data(200, 1);
    TrainConfig c;
    c.epochs = 300;
    auto r = multi_restart(Topology::parse("[1,1]x3"), dev, data, c);
    const auto& rep = r.best().report;
    CHECK(rep.best_mse < 0.5 * rep.trace.front().mse);
    CHECK_FALSE(rep.diverged);
}

TEST_CASE("l1 makes pruning gains trainable and adds the penalty") {
    auto dev = AnalyticDevice::generate(1);
    auto data = sine_data(50, 1);
    auto m = random_init(Topology::parse("[1,1]x1"), dev, 0);
    prepare_model(m, data);
    TrainConfig c;
    c.epochs = 0;
    c.l1 = 0.5;
    auto r = train(m, data, c);
    CHECK(r.model.trainable.pruning_gain);
    // k = 1 at init
    CHECK(r.report.trace[0].loss == doctest::Approx(r.report.trace[0].mse + 0.5));
}

TEST_CASE("prepare_model uses declared feature ranges") {
    auto dev = AnalyticDevice::generate(1);
    Dataset d;
    d.n_features = 1;
    d.features = {0.2, 0.4};
    d.targets = {0, 1};
    d.feature_ranges = {Interval{0.0, 1.0}};
    auto m = random_init(Topology::parse("[1,1]x1"), dev, 0);
    prepare_model(m, d);
    CHECK(m.encoders[0].feature.lo == 0.0);
    CHECK(m.encoders[0].feature.hi == 1.0);
    Dataset wide = d;
    wide.n_features = 2;
    wide.features = {0, 0, 1, 1};
    wide.feature_ranges.clear();
    CHECK_THROWS_AS(prepare_model(m, wide), StructuralError);
}

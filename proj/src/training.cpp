#include "akan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "akan/errors.hpp"
#include "akan/textio.hpp"

namespace akan {

void Dataset::validate() const {
    if (n_features == 0) throw StructuralError("dataset needs at least one feature column");
    if (targets.empty()) throw StructuralError("dataset is empty");
    if (features.size() != n_features * targets.size()) {
        throw StructuralError("dataset has " + std::to_string(features.size()) + " feature values for " +
                              std::to_string(targets.size()) + " samples x " + std::to_string(n_features) + " columns");
    }
    if (!feature_ranges.empty()) {
        if (feature_ranges.size() != n_features) throw StructuralError("one feature range per column required");
        for (const auto& r : feature_ranges) {
            if (!(r.lo < r.hi)) throw StructuralError("feature range needs lo < hi");
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.n_features = n_features;
    out.feature_ranges = feature_ranges;
    out.features.reserve(indices.size() * n_features);
    out.targets.reserve(indices.size());
    for (auto i : indices) {
        if (i >= size()) throw ArgumentError("subset index out of range");
        auto r = row(i);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.targets.push_back(targets[i]);
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0 && learning_rate < 1.0)) throw ArgumentError("learning rate must be in (0, 1)");
    if (!(l1 >= 0.0)) throw ArgumentError("L1 coefficient must be >= 0");
    if (restarts < 1) throw ArgumentError("restarts must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ArgumentError("Adam betas must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ArgumentError("Adam epsilon must be > 0");
}

TrainConfig TrainConfig::regression() { return TrainConfig{}; }

TrainConfig TrainConfig::classification() {
    TrainConfig c;
    c.epochs = 500;
    c.batch_size = 64;
    c.task = TaskKind::Classification;
    return c;
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) {
        throw ArgumentError("mse_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                            std::to_string(targets.size()) + " targets");
    }
    if (predictions.empty()) throw ArgumentError("mse_loss: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        s += d * d;
    }
    return s / static_cast<double>(predictions.size());
}

Var mse_loss(Tape& tape, std::span<const Var> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) throw ArgumentError("mse_loss: length mismatch");
    if (predictions.empty()) throw ArgumentError("mse_loss: empty input");
    std::vector<Var> sq;
    sq.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        Var d = predictions[i] - targets[i];
        sq.push_back(d * d);
    }
    return tape.scale(tape.sum(sq), 1.0 / static_cast<double>(predictions.size()));
}

double classification_metrics(std::span<const double> predictions, std::span<const double> labels, double threshold) {
    if (predictions.size() != labels.size()) throw ArgumentError("classification_metrics: length mismatch");
    if (predictions.empty()) throw ArgumentError("classification_metrics: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        correct += (predictions[i] > threshold) == (labels[i] > 0.0);
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

void adam_step(ParamSet& params, std::span<const double> gradient, AdamState& state, const TrainConfig& config) {
    const std::size_t n = params.size();
    if (gradient.size() != n) throw StructuralError("adam_step: gradient length does not match parameters");
    if (state.m.size() != n || state.v.size() != n) throw StructuralError("adam_step: optimizer state has wrong size");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(gradient[i])) {
            const auto& slices = params.slices();
            std::string where = "#" + std::to_string(i);
            for (const auto& s : slices) {
                if (i >= s.offset && i < s.offset + s.size) where = s.name;
            }
            throw NumericalError("non-finite gradient component " + std::to_string(i) + " (" + where + ")");
        }
    }
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    auto values = params.values();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gradient[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    params.project();
}

TrainReport optimize(const Problem& problem, const TrainConfig& config) {
    config.validate();
    if (!problem.loss_grad || !problem.evaluate) throw ArgumentError("optimize: problem is missing its loss functions");
    if (problem.samples == 0) throw ArgumentError("optimize: empty dataset");

    const auto start = std::chrono::steady_clock::now();
    TrainReport rep;
    ParamSet ps = problem.initial;
    rep.best_params = ps;
    rep.best_loss = std::numeric_limits<double>::infinity();
    AdamState state(ps.size());
    std::vector<double> grad(ps.size(), 0.0);
    std::vector<std::size_t> order(problem.samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed ^ 0xa0761d6478bd642fULL);

    std::size_t last_improvement = 0;
    bool stop = false;
    auto record = [&](std::size_t epoch, const LossEval& ev) {
        if (!std::isfinite(ev.objective) || !std::isfinite(ev.metric)) {
            rep.diverged = true;
            rep.note = "non-finite loss at epoch " + std::to_string(epoch);
            stop = true;
            return;
        }
        rep.trace.push_back({epoch, ev.objective, ev.data_loss, ev.metric});
        if (ev.objective < rep.best_loss) {
            if (ev.objective < rep.best_loss - config.plateau_delta) last_improvement = epoch;
            rep.best_loss = ev.objective;
            rep.best_mse = ev.data_loss;
            rep.best_metric = ev.metric;
            rep.best_epoch = epoch;
            rep.best_params = ps;
        }
        if (ev.objective > config.divergence_threshold) {
            rep.diverged = true;
            rep.note = "loss exceeded " + textio::format_double(config.divergence_threshold) + " at epoch " +
                       std::to_string(epoch);
            stop = true;
        } else if (config.plateau_epochs > 0 && epoch - last_improvement >= config.plateau_epochs) {
            rep.plateau_stopped = true;
            stop = true;
        }
    };

    const bool full_batch = config.batch_size == 0 || config.batch_size >= problem.samples;
    try {
        if (full_batch) {
            for (std::size_t e = 0;; ++e) {
                const LossEval ev = problem.loss_grad(ps.values(), order, grad);
                record(e, ev);
                if (stop || e == config.epochs) break;
                adam_step(ps, grad, state, config);
                rep.epochs_run = e + 1;
            }
        } else {
            record(0, problem.evaluate(ps.values()));
            for (std::size_t e = 1; e <= config.epochs && !stop; ++e) {
                std::shuffle(order.begin(), order.end(), rng);
                for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
                    const std::size_t len = std::min(config.batch_size, order.size() - b);
                    problem.loss_grad(ps.values(), std::span<const std::size_t>(order).subspan(b, len), grad);
                    adam_step(ps, grad, state, config);
                }
                rep.epochs_run = e;
                record(e, problem.evaluate(ps.values()));
            }
        }
    } catch (const NumericalError& err) {
        rep.diverged = true;
        rep.note = err.what();
    }
    if (rep.trace.empty()) throw NumericalError("initial loss is not finite: " + rep.note);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

void prepare_model(AkanModel& model, const Dataset& data) {
    data.validate();
    if (data.n_features != model.topology.inputs()) {
        throw StructuralError("dataset has " + std::to_string(data.n_features) + " features, model expects " +
                              std::to_string(model.topology.inputs()));
    }
    model.encoders.assign(data.n_features, InputEncoder{});
    for (std::size_t j = 0; j < data.n_features; ++j) {
        if (!data.feature_ranges.empty()) {
            model.encoders[j].feature = data.feature_ranges[j];
            continue;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < data.size(); ++i) {
            lo = std::min(lo, data.features[i * data.n_features + j]);
            hi = std::max(hi, data.features[i * data.n_features + j]);
        }
        if (!(lo < hi)) {
            lo -= 0.5;
            hi += 0.5;
        }
        model.encoders[j].feature = Interval{lo, hi};
    }
    calibrate_scalers(model, data.features, data.n_features);
}

namespace {

struct AkanObjective {
    AkanModel model;
    std::shared_ptr<const Dataset> data;
    TrainConfig config;
    ParamSet initial;
    std::vector<std::size_t> k_leaves;  // leaf positions holding pruning gains
    ClampStats* clamps = nullptr;
    Tape tape;

    double penalty(std::span<const double> params) const {
        double s = 0.0;
        for (auto i : k_leaves) s += std::abs(params[i]);
        return config.l1 * s;
    }

    LossEval loss_grad(std::span<const double> params, std::span<const std::size_t> batch, std::span<double> grad) {
        tape.clear();
        auto leaves = tape.variables(params);
        auto lifted = lift_params(model, tape, leaves);
        std::vector<Var> sq;
        sq.reserve(batch.size());
        std::vector<double> preds, labels;
        const bool classify = config.task == TaskKind::Classification;
        if (classify) {
            preds.reserve(batch.size());
            labels.reserve(batch.size());
        }
        ClampStats local;
        for (auto i : batch) {
            Var out = akan_forward_taped(model, lifted, tape, data->row(i), &local, config.taping)[0];
            Var d = out - data->targets[i];
            sq.push_back(d * d);
            if (classify) {
                preds.push_back(out.value());
                labels.push_back(data->targets[i]);
            }
        }
        if (clamps) *clamps += local;
        Var mse = tape.scale(tape.sum(sq), 1.0 / static_cast<double>(batch.size()));
        Var objective = mse;
        if (config.l1 > 0.0 && !k_leaves.empty()) {
            std::vector<Var> ks;
            for (auto i : k_leaves) ks.push_back(tape.abs(leaves[i]));
            objective = objective + tape.scale(tape.sum(ks), config.l1);
        }
        auto g = tape.gradient(objective, leaves);
        std::copy(g.begin(), g.end(), grad.begin());
        LossEval ev;
        ev.objective = objective.value();
        ev.data_loss = mse.value();
        ev.metric = classify ? classification_metrics(preds, labels, config.threshold) : ev.data_loss;
        return ev;
    }

    LossEval evaluate(std::span<const double> params) {
        ParamSet ps = initial;
        std::copy(params.begin(), params.end(), ps.values().begin());
        AkanModel m = model;
        assign_params(m, ps);
        ClampStats local;
        auto preds = akan_forward_batch(m, data->features, &local);
        if (clamps) *clamps += local;
        LossEval ev;
        ev.data_loss = mse_loss(preds, data->targets);
        ev.objective = ev.data_loss + penalty(params);
        ev.metric = config.task == TaskKind::Classification ? classification_metrics(preds, data->targets, config.threshold)
                                                            : ev.data_loss;
        return ev;
    }
};

}  // namespace

Problem make_problem(const AkanModel& model, const Dataset& data, const TrainConfig& config, ClampStats* clamps) {
    model.validate();
    data.validate();
    if (data.n_features != model.topology.inputs()) throw StructuralError("dataset width does not match the model inputs");
    if (model.topology.outputs() != 1) throw StructuralError("training supports a single output");

    auto obj = std::make_shared<AkanObjective>();
    obj->model = model;
    obj->data = std::make_shared<const Dataset>(data);
    obj->config = config;
    obj->initial = collect_params(model);
    obj->clamps = clamps;
    auto params = model.params;
    std::size_t leaf = 0;
    for_each_scalar(std::span<const Interval, kElectrodes>(model.device->ranges().voltage), params,
                    [&](ParamGroup g, double&, Bounds) {
                        if (!model.trainable.enabled(g)) return;
                        if (g == ParamGroup::PruningGain) obj->k_leaves.push_back(leaf);
                        ++leaf;
                    });

    Problem p;
    p.initial = obj->initial;
    p.samples = data.size();
    p.loss_grad = [obj](std::span<const double> params, std::span<const std::size_t> batch, std::span<double> grad) {
        return obj->loss_grad(params, batch, grad);
    };
    p.evaluate = [obj](std::span<const double> params) { return obj->evaluate(params); };
    return p;
}

TrainResult train(AkanModel model, const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (config.l1 > 0.0) model.trainable.pruning_gain = true;
    ClampStats clamps;
    Problem problem = make_problem(model, data, config, &clamps);
    TrainResult result;
    result.report = optimize(problem, config);
    result.report.clamps = clamps;
    assign_params(model, result.report.best_params);
    result.model = std::move(model);
    return result;
}

RestartResult multi_restart(const Topology& topology, std::shared_ptr<const DeviceModel> device, const Dataset& data,
                            const TrainConfig& config, std::span<const std::uint64_t> seeds) {
    config.validate();
    std::vector<std::uint64_t> seed_list(seeds.begin(), seeds.end());
    if (seed_list.empty()) {
        for (std::size_t r = 0; r < config.restarts; ++r) seed_list.push_back(config.seed + r);
    }
    std::vector<std::pair<std::uint64_t, TrainResult>> runs;
    for (auto seed : seed_list) {
        AkanModel m = random_init(topology, device, seed);
        prepare_model(m, data);
        TrainConfig c = config;
        c.seed = seed;
        runs.emplace_back(seed, train(std::move(m), data, c));
    }
    std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
        return a.second.report.best_loss < b.second.report.best_loss;
    });

    RestartResult out;
    for (auto& [seed, run] : runs) {
        out.seeds.push_back(seed);
        out.runs.push_back(std::move(run));
    }
    out.top_k = std::min<std::size_t>(5, out.runs.size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t r = 0; r < out.top_k; ++r) {
        auto preds = akan_forward_batch(out.runs[r].model, data.features);
        if (r == 0) {
            out.envelope_lo = preds;
            out.envelope_hi = preds;
        } else {
            for (std::size_t i = 0; i < preds.size(); ++i) {
                out.envelope_lo[i] = std::min(out.envelope_lo[i], preds[i]);
                out.envelope_hi[i] = std::max(out.envelope_hi[i], preds[i]);
            }
        }
        lo = std::min(lo, out.runs[r].report.best_mse);
        hi = std::max(hi, out.runs[r].report.best_mse);
    }
    out.spread = hi - lo;
    return out;
}

void write_trace_csv(const TrainReport& report, std::ostream& out) {
    using textio::format_double;
    out << "epoch,loss,mse,metric\n";
    for (const auto& r : report.trace) {
        out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.mse) << ',' << format_double(r.metric)
            << '\n';
    }
}

}  // namespace akan

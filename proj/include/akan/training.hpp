#pragma once
// Adam training for aKANs (and any other flat-parameter problem), multi-restart search
// and classification metrics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "akan/autodiff.hpp"
#include "akan/network.hpp"

namespace akan {

/// Row-major feature matrix with one scalar target per sample.
struct Dataset {
    std::size_t n_features = 0;
    std::vector<double> features;
    std::vector<double> targets;
    /// Declared domain of each feature column; input encoders map it onto the voltage range.
    std::vector<Interval> feature_ranges;

    std::size_t size() const noexcept { return targets.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * n_features, n_features}; }
    /// Throws StructuralError on inconsistent sizes or an empty dataset.
    void validate() const;
    /// Rows at the given indices (order preserved).
    Dataset subset(std::span<const std::size_t> indices) const;
};

enum class TaskKind { Regression, Classification };

struct TrainConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 2000;
    /// 0 = full batch.
    std::size_t batch_size = 0;
    /// Coefficient of sum_i |k_i| over all EP pruning gains.
    double l1 = 0.0;
    std::size_t restarts = 1;
    std::uint64_t seed = 0;
    /// Stop once the best objective has not improved by more than plateau_delta for this many epochs (0 = never).
    std::size_t plateau_epochs = 200;
    double plateau_delta = 1e-6;
    double divergence_threshold = 1e6;
    TaskKind task = TaskKind::Regression;
    double threshold = 0.0;
    DeviceTaping taping = DeviceTaping::Fused;

    /// Throws ArgumentError unless lr in (0, 1), l1 >= 0, restarts >= 1, betas in [0, 1), epsilon > 0.
    void validate() const;

    /// Regression defaults: 2000 epochs, full batch. Classification: 500 epochs, batches of 64.
    static TrainConfig regression();
    static TrainConfig classification();
};

double mse_loss(std::span<const double> predictions, std::span<const double> targets);
Var mse_loss(Tape& tape, std::span<const Var> predictions, std::span<const double> targets);

/// Fraction of samples where (output > threshold) agrees with (label > 0). Outputs equal to
/// the threshold count as the negative class. Labels may be {0, 1} or {-1, +1}.
double classification_metrics(std::span<const double> predictions, std::span<const double> labels, double threshold = 0.0);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update followed by projection onto the parameter boxes.
/// Throws NumericalError naming the first non-finite gradient component; params and
/// state are left untouched in that case.
void adam_step(ParamSet& params, std::span<const double> gradient, AdamState& state, const TrainConfig& config);

/// Objective value pieces over one batch (or the full dataset).
struct LossEval {
    double objective = 0.0;  // data loss + regularization
    double data_loss = 0.0;  // MSE
    double metric = 0.0;     // MSE for regression, accuracy for classification
};

/// A flat-parameter training problem. `loss_grad` evaluates the batch objective at
/// `params` and writes its gradient; `evaluate` scores the full training set.
struct Problem {
    ParamSet initial;
    std::size_t samples = 0;
    std::function<LossEval(std::span<const double> params, std::span<const std::size_t> batch, std::span<double> grad)>
        loss_grad;
    std::function<LossEval(std::span<const double> params)> evaluate;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;  // objective
    double mse = 0.0;
    double metric = 0.0;
};

/// The trace holds one record per evaluated parameter state: entry 0 is the initial
/// model, entry e the state after e epochs. With 0 epochs the trace has length 1.
struct TrainReport {
    std::vector<EpochRecord> trace;
    double best_loss = 0.0;
    double best_mse = 0.0;
    double best_metric = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    ParamSet best_params;
    ClampStats clamps;
    bool diverged = false;
    bool plateau_stopped = false;
    std::string note;
    double wall_seconds = 0.0;
};

/// Runs Adam on `problem`; returns the best-so-far parameters.
TrainReport optimize(const Problem& problem, const TrainConfig& config);

struct TrainResult {
    AkanModel model;  // best parameters assigned
    TrainReport report;
};

/// Sets input encoders from the dataset's feature ranges and calibrates the scalers on it.
void prepare_model(AkanModel& model, const Dataset& data);

/// Batch objective for an aKAN: MSE over the batch + l1 * sum |k| (taped).
Problem make_problem(const AkanModel& model, const Dataset& data, const TrainConfig& config, ClampStats* clamps);

/// Trains the model as given (no re-initialization or scaler calibration). When l1 > 0 the
/// pruning gains are made trainable.
TrainResult train(AkanModel model, const Dataset& data, const TrainConfig& config);

struct RestartResult {
    std::vector<TrainResult> runs;   // sorted by best_loss, ties by seed order
    std::vector<std::uint64_t> seeds;  // seed of each entry in runs
    std::size_t top_k = 0;           // min(5, R)
    /// Pointwise min/max of the top_k models' predictions over the training inputs.
    std::vector<double> envelope_lo;
    std::vector<double> envelope_hi;
    double spread = 0.0;  // max - min of best_mse over the top_k

    const TrainResult& best() const { return runs.front(); }
};

/// R runs from random_init(topology, device, seed_r) followed by prepare_model and train.
/// Seeds default to config.seed + r.
RestartResult multi_restart(const Topology& topology, std::shared_ptr<const DeviceModel> device, const Dataset& data,
                            const TrainConfig& config, std::span<const std::uint64_t> seeds = {});

/// "epoch,loss,mse,metric" with 17 significant digits.
void write_trace_csv(const TrainReport& report, std::ostream& out);

}  // namespace akan

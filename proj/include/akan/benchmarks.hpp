#pragma once
// Target functions, synthetic and tabular classification data, dense MLP baselines and
// configuration sweeps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "akan/network.hpp"
#include "akan/training.hpp"

namespace akan {

// ---------------------------------------------------------------------------
// Targets

inline constexpr std::size_t kBesselTerms = 60;
inline constexpr double kBesselMaxAbs = 25.0;

/// Power series sum_{m=0}^{60} (-1)^m (x/2)^{2m} / (m!)^2 with the term recurrence
/// t_m = -t_{m-1} (x/2)^2 / m^2. Throws DomainError for |x| > 25.
double bessel_j0(double x);
/// Partial sum through term m = last.
double bessel_j0_partial(double x, std::size_t last);

struct RegressionTask {
    std::string name;
    std::size_t arity = 1;
    std::function<double(std::span<const double>)> target;
    std::vector<Interval> domain;  // unit hypercube by default
    std::size_t samples = 1000;
};

/// "sine" sin(2 pi x), "bessel" J0(20x), "exp2" e^(sin(pi x1) + x2^2),
/// "exp4" e^(sin(pi(x1^2 + x2^2)) + sin(pi(x3^2 + x4^2))). Throws ArgumentError otherwise.
RegressionTask regression_task(const std::string& name);
std::vector<std::string> regression_task_names();

/// y_norm = 2 (y - lo) / (hi - lo) - 1.
struct NormalizationMap {
    double lo = -1.0;
    double hi = 1.0;

    double apply(double y) const noexcept;
    double invert(double y_norm) const noexcept;
};

struct TargetBatch {
    std::vector<double> raw;
    std::vector<double> normalized;
    NormalizationMap map;
};

/// Evaluates the target on a row-major input matrix and normalizes to [-1, 1] by the batch
/// min/max. Throws StructuralError if the matrix width is not the task arity.
TargetBatch target_eval(const RegressionTask& task, std::span<const double> inputs, std::size_t n_columns);

struct RegressionData {
    Dataset data;  // normalized targets
    TargetBatch targets;
};

/// P inputs uniform on the task domain, seeded.
RegressionData make_regression_data(const RegressionTask& task, std::size_t samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Classification data

/// Raw 2-class data with labels in {0, 1}.
struct LabeledData {
    std::size_t n_features = 0;
    std::vector<std::string> feature_names;
    std::vector<double> features;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

/// n / 2 points per class, shuffled deterministically. Throws ArgumentError if n is odd or noise < 0.
LabeledData make_moons(std::size_t n, double noise, std::uint64_t seed);
/// Radius r ~ U(0.1, 1), angle 2 pi turns r + k pi, Gaussian noise std 0.025 * noise.
LabeledData make_spirals(std::size_t n, double turns, double noise, std::uint64_t seed);

inline constexpr double kSpiralNoiseScale = 0.025;

struct TabularSchema {
    char delimiter = ',';
    bool header = false;
    /// Column names in file order (also used to find columns when the file has a header).
    std::vector<std::string> columns;
    std::vector<std::string> features;
    std::string label;
    /// Label tokens mapped to class 1; every other token is class 0. Empty: numeric labels, class 1 iff > 0.
    std::vector<std::string> positive;

    static TabularSchema from_json(const std::string& text);
    static TabularSchema load(const std::filesystem::path& path);
};

/// Reads a delimiter-separated file into raw features and {0, 1} labels. Errors are
/// ParseErrors (MissingColumn, NonNumeric, EmptyFile) carrying 1-based row/column.
LabeledData load_tabular(const std::filesystem::path& path, const TabularSchema& schema);
LabeledData load_tabular(std::istream& in, const TabularSchema& schema, const std::string& source_name = "<stream>");

/// Seeded permutation split; the train part has llround(n * train_fraction) rows.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};
SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

struct ClassificationData {
    Dataset train;
    Dataset validation;
    SplitIndices split;
    /// Per-column [min, max] of the raw features (mapped onto the voltage range).
    std::vector<Interval> raw_ranges;
};

/// Scales each column min/max onto `voltage` (exact endpoints), maps labels to {-1, +1} and splits.
ClassificationData make_classification_data(const LabeledData& raw, const Interval& voltage,
                                            double train_fraction = 0.8, std::uint64_t seed = 0);

/// Dataset CSV: header "x0,...,x{n-1},y", one row per sample, target last.
void write_dataset_csv(const Dataset& data, std::ostream& out);
Dataset read_dataset_csv(std::istream& in, const std::string& source_name = "<stream>");

// ---------------------------------------------------------------------------
// MLP baseline

enum class Activation { Relu, Tanh };
const char* to_string(Activation a);
Activation parse_activation(const std::string& text);

struct MlpBaseline {
    std::vector<std::size_t> widths;
    Activation activation = Activation::Tanh;
};

/// sum_l (w_l w_{l+1} + w_{l+1}).
std::size_t mlp_param_count(std::span<const std::size_t> widths);

/// Weights per layer row-major (out x in) followed by the bias, layer after layer.
struct MlpModel {
    MlpBaseline config;
    std::vector<double> params;
    std::vector<Interval> input_ranges;  // inputs are mapped onto [-1, 1]

    /// Linear output layer, hidden layers with the configured activation.
    std::vector<double> forward(std::span<const double> features) const;
    std::vector<double> forward_batch(std::span<const double> features) const;
};

/// Seeded Glorot-uniform weights, zero biases.
MlpModel mlp_init(const MlpBaseline& baseline, std::span<const Interval> input_ranges, std::uint64_t seed);

/// Mean-squared-error objective with a batched Eigen forward/backward pass.
Problem make_mlp_problem(const MlpModel& model, const Dataset& data, const TrainConfig& config);

struct MlpTrainResult {
    MlpModel model;
    TrainReport report;
};

MlpTrainResult mlp_baseline_train(const MlpBaseline& baseline, const Dataset& data, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Sweeps

enum class Family { Akan, MlpRelu, MlpTanh };
const char* to_string(Family f);

struct SweepCell {
    Family family = Family::Akan;
    std::vector<std::size_t> widths;
    std::size_t rnpus_per_ep = 0;  // aKAN only

    /// "[2,3,1]x4" for aKANs, "[2,5,1]" for MLPs.
    std::string network() const;
};

struct SweepGrid {
    std::string name;
    std::string task;
    std::vector<SweepCell> cells;
};

/// tables1-fig2d/e/f (aKAN) and tables2-fig2d/e/f (MLP, one cell per activation).
SweepGrid named_grid(const std::string& name);
std::vector<std::string> named_grid_names();

struct SweepRow {
    SweepCell cell;
    std::size_t params = 0;
    std::optional<std::uint64_t> seed;  // empty on summary rows
    double mse = 0.0;
    std::optional<double> accuracy;
    std::optional<double> top5_min;  // summary only
    std::optional<double> top5_max;
    double wall_seconds = 0.0;  // not written to the results CSV
};

struct SweepOptions {
    TrainConfig train = TrainConfig::regression();
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t samples = 1000;
    std::uint64_t data_seed = 0;
    /// Concurrent runs; row order does not depend on it.
    std::size_t workers = 1;
    /// Called after every finished run, serialized across workers.
    std::function<void(const SweepRow&)> progress;
};

/// For every cell: one row per seed, then one summary row with the best MSE and the
/// min/max over the best five runs.
std::vector<SweepRow> sweep(const RegressionTask& task, const SweepGrid& grid, std::shared_ptr<const DeviceModel> device,
                            const SweepOptions& options);

/// "family,network,d,params,seed,row,mse,accuracy,top5_min,top5_max".
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
/// Run rows only: "family,network,d,seed,wall_seconds".
void write_sweep_timing_csv(const std::vector<SweepRow>& rows, std::ostream& out);

struct SweepCsvRow {
    std::string family;
    std::string network;
    std::size_t d = 0;
    std::size_t params = 0;
    std::string seed;
    std::string row;
    double mse = 0.0;
};
std::vector<SweepCsvRow> read_sweep_csv(std::istream& in, const std::string& source_name = "<stream>");

}  // namespace akan

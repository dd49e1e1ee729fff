#include "akan/benchmarks.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "akan/errors.hpp"
#include "akan/textio.hpp"

namespace akan {

// ---------------------------------------------------------------------------
// Targets

double bessel_j0_partial(double x, std::size_t last) {
    if (!(std::abs(x) <= kBesselMaxAbs)) {
        throw DomainError("bessel_j0: |x| = " + textio::format_double(std::abs(x)) + " exceeds the series budget of 25");
    }
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (std::size_t m = 1; m <= last; ++m) {
        term *= -q / static_cast<double>(m * m);
        sum += term;
    }
    return sum;
}

double bessel_j0(double x) { return bessel_j0_partial(x, kBesselTerms); }

namespace {

std::vector<Interval> unit_cube(std::size_t n) { return std::vector<Interval>(n, Interval{0.0, 1.0}); }

}  // namespace

RegressionTask regression_task(const std::string& name) {
    using std::numbers::pi;
    RegressionTask t;
    t.name = name;
    if (name == "sine") {
        t.arity = 1;
        t.target = [](std::span<const double> x) { return std::sin(2.0 * pi * x[0]); };
    } else if (name == "bessel") {
        t.arity = 1;
        t.target = [](std::span<const double> x) { return bessel_j0(20.0 * x[0]); };
    } else if (name == "exp2") {
        t.arity = 2;
        t.target = [](std::span<const double> x) { return std::exp(std::sin(pi * x[0]) + x[1] * x[1]); };
    } else if (name == "exp4") {
        t.arity = 4;
        t.target = [](std::span<const double> x) {
            return std::exp(std::sin(pi * (x[0] * x[0] + x[1] * x[1])) + std::sin(pi * (x[2] * x[2] + x[3] * x[3])));
        };
    } else {
        throw ArgumentError("unknown regression task '" + name + "' (expected sine, bessel, exp2 or exp4)");
    }
    t.domain = unit_cube(t.arity);
    return t;
}

std::vector<std::string> regression_task_names() { return {"sine", "bessel", "exp2", "exp4"}; }

double NormalizationMap::apply(double y) const noexcept { return 2.0 * (y - lo) / (hi - lo) - 1.0; }
double NormalizationMap::invert(double y_norm) const noexcept { return lo + 0.5 * (y_norm + 1.0) * (hi - lo); }

TargetBatch target_eval(const RegressionTask& task, std::span<const double> inputs, std::size_t n_columns) {
    if (n_columns != task.arity) {
        throw StructuralError("task '" + task.name + "' takes " + std::to_string(task.arity) + " inputs, got " +
                              std::to_string(n_columns));
    }
    if (inputs.empty() || inputs.size() % n_columns != 0) throw StructuralError("input matrix size is not a multiple of the arity");
    TargetBatch out;
    const std::size_t n = inputs.size() / n_columns;
    out.raw.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.raw.push_back(task.target(inputs.subspan(i * n_columns, n_columns)));
    auto [mn, mx] = std::minmax_element(out.raw.begin(), out.raw.end());
    out.map = NormalizationMap{*mn, *mx};
    if (!(out.map.lo < out.map.hi)) {
        out.map.lo -= 1.0;
        out.map.hi += 1.0;
    }
    out.normalized.reserve(n);
    for (double y : out.raw) out.normalized.push_back(out.map.apply(y));
    return out;
}

RegressionData make_regression_data(const RegressionTask& task, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) throw ArgumentError("need at least one sample");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RegressionData out;
    out.data.n_features = task.arity;
    out.data.feature_ranges = task.domain;
    out.data.features.reserve(samples * task.arity);
    for (std::size_t i = 0; i < samples; ++i) {
        for (std::size_t j = 0; j < task.arity; ++j) {
            const auto& d = task.domain[j];
            out.data.features.push_back(d.lo + unit(rng) * d.width());
        }
    }
    out.targets = target_eval(task, out.data.features, task.arity);
    out.data.targets = out.targets.normalized;
    return out;
}

// ---------------------------------------------------------------------------
// Classification data

namespace {

void shuffle_samples(LabeledData& d, std::mt19937_64& rng) {
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    LabeledData out;
    out.n_features = d.n_features;
    out.feature_names = d.feature_names;
    for (auto i : perm) {
        out.features.insert(out.features.end(), d.features.begin() + static_cast<std::ptrdiff_t>(i * d.n_features),
                            d.features.begin() + static_cast<std::ptrdiff_t>((i + 1) * d.n_features));
        out.labels.push_back(d.labels[i]);
    }
    d = std::move(out);
}

}  // namespace

LabeledData make_moons(std::size_t n, double noise, std::uint64_t seed) {
    if (n % 2 != 0) throw ArgumentError("make_moons: n must be even");
    if (!(noise >= 0.0)) throw ArgumentError("make_moons: noise must be >= 0");
    using std::numbers::pi;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LabeledData d;
    d.n_features = 2;
    d.feature_names = {"x0", "x1"};
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < n / 2 ? 0 : 1;
        const double t = angle(rng);
        double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
        if (noise > 0.0) {
            x += noise * gauss(rng);
            y += noise * gauss(rng);
        }
        d.features.push_back(x);
        d.features.push_back(y);
        d.labels.push_back(label);
    }
    shuffle_samples(d, rng);
    return d;
}

LabeledData make_spirals(std::size_t n, double turns, double noise, std::uint64_t seed) {
    if (n % 2 != 0) throw ArgumentError("make_spirals: n must be even");
    if (!(turns > 0.0)) throw ArgumentError("make_spirals: turns must be > 0");
    if (!(noise >= 0.0)) throw ArgumentError("make_spirals: noise must be >= 0");
    using std::numbers::pi;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> radius(0.1, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = kSpiralNoiseScale * noise;
    LabeledData d;
    d.n_features = 2;
    d.feature_names = {"x0", "x1"};
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < n / 2 ? 0 : 1;
        const double r = radius(rng);
        const double theta = 2.0 * pi * turns * r + label * pi;
        double x = r * std::cos(theta);
        double y = r * std::sin(theta);
        if (sd > 0.0) {
            x += sd * gauss(rng);
            y += sd * gauss(rng);
        }
        d.features.push_back(x);
        d.features.push_back(y);
        d.labels.push_back(label);
    }
    shuffle_samples(d, rng);
    return d;
}

TabularSchema TabularSchema::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ParseErrorKind::Syntax, std::string("schema: ") + e.what());
    }
    TabularSchema s;
    try {
        const std::string delim = j.value("delimiter", std::string(","));
        if (delim == "\\t" || delim == "tab") {
            s.delimiter = '\t';
        } else if (delim.size() == 1) {
            s.delimiter = delim[0];
        } else {
            throw ParseError(ParseErrorKind::Syntax, "schema: delimiter must be a single character");
        }
        s.header = j.value("header", false);
        s.columns = j.value("columns", std::vector<std::string>{});
        s.features = j.at("features").get<std::vector<std::string>>();
        s.label = j.at("label").get<std::string>();
        s.positive = j.value("positive", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ParseErrorKind::Structural, std::string("schema: ") + e.what());
    }
    if (s.features.empty()) throw ParseError(ParseErrorKind::Structural, "schema: no feature columns");
    if (!s.header && s.columns.empty()) throw ParseError(ParseErrorKind::Structural, "schema: headerless files need 'columns'");
    return s;
}

TabularSchema TabularSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schema " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(delim, start);
        out.emplace_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

bool blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

LabeledData load_tabular(std::istream& in, const TabularSchema& schema, const std::string& source_name) {
    std::string line;
    std::size_t row = 0;
    auto next_line = [&]() {
        while (std::getline(in, line)) {
            ++row;
            if (!blank(line)) return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError(ParseErrorKind::EmptyFile, source_name + ": file is empty", 0, 0);

    std::vector<std::string> columns = schema.columns;
    bool pending = true;  // `line` holds an unconsumed data row
    if (schema.header) {
        columns = split_line(line, schema.delimiter);
        pending = false;
    }
    auto find = [&](const std::string& name) -> std::size_t {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            throw ParseError(ParseErrorKind::MissingColumn, source_name + ": column '" + name + "' not found", row, 0);
        }
        return static_cast<std::size_t>(it - columns.begin());
    };
    std::vector<std::size_t> feature_idx;
    for (const auto& f : schema.features) feature_idx.push_back(find(f));
    const std::size_t label_idx = find(schema.label);

    LabeledData d;
    d.n_features = feature_idx.size();
    d.feature_names = schema.features;
    while (pending || next_line()) {
        pending = false;
        auto cells = split_line(line, schema.delimiter);
        auto cell = [&](std::size_t c) -> const std::string& {
            if (c >= cells.size()) {
                throw ParseError(ParseErrorKind::MissingColumn,
                                 source_name + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                     " cells, column " + std::to_string(c + 1) + " missing",
                                 row, c + 1);
            }
            return cells[c];
        };
        for (auto c : feature_idx) {
            auto v = textio::parse_double(cell(c));
            if (!v || !std::isfinite(*v)) {
                throw ParseError(ParseErrorKind::NonNumeric,
                                 source_name + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                                     ": '" + cell(c) + "' is not a finite number",
                                 row, c + 1);
            }
            d.features.push_back(*v);
        }
        const std::string& lab = cell(label_idx);
        if (schema.positive.empty()) {
            auto v = textio::parse_double(lab);
            if (!v || !std::isfinite(*v)) {
                throw ParseError(ParseErrorKind::NonNumeric,
                                 source_name + ": row " + std::to_string(row) + ", column " +
                                     std::to_string(label_idx + 1) + ": label '" + lab + "' is not numeric",
                                 row, label_idx + 1);
            }
            d.labels.push_back(*v > 0.0 ? 1 : 0);
        } else {
            d.labels.push_back(std::find(schema.positive.begin(), schema.positive.end(), lab) != schema.positive.end());
        }
    }
    if (d.labels.empty()) throw ParseError(ParseErrorKind::EmptyFile, source_name + ": no data rows", row, 0);
    return d;
}

LabeledData load_tabular(const std::filesystem::path& path, const TabularSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return load_tabular(in, schema, path.string());
}

SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train fraction must be in (0, 1)");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    SplitIndices s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return s;
}

ClassificationData make_classification_data(const LabeledData& raw, const Interval& voltage, double train_fraction,
                                            std::uint64_t seed) {
    if (raw.size() == 0) throw ArgumentError("classification data is empty");
    const std::size_t nf = raw.n_features;
    ClassificationData out;
    out.raw_ranges.assign(nf, Interval{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (std::size_t j = 0; j < nf; ++j) {
            out.raw_ranges[j].lo = std::min(out.raw_ranges[j].lo, raw.features[i * nf + j]);
            out.raw_ranges[j].hi = std::max(out.raw_ranges[j].hi, raw.features[i * nf + j]);
        }
    }
    Dataset all;
    all.n_features = nf;
    all.feature_ranges.assign(nf, voltage);
    all.features.reserve(raw.features.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (std::size_t j = 0; j < nf; ++j) {
            const Interval& r = out.raw_ranges[j];
            const double x = raw.features[i * nf + j];
            all.features.push_back(r.lo < r.hi ? r.map_to(voltage, x) : 0.5 * (voltage.lo + voltage.hi));
        }
        all.targets.push_back(raw.labels[i] ? 1.0 : -1.0);
    }
    out.split = split_indices(raw.size(), train_fraction, seed);
    out.train = all.subset(out.split.train);
    out.validation = all.subset(out.split.validation);
    return out;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
    data.validate();
    for (std::size_t j = 0; j < data.n_features; ++j) out << 'x' << j << ',';
    out << "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.row(i)) out << textio::format_double(v) << ',';
        out << textio::format_double(data.targets[i]) << '\n';
    }
}

Dataset read_dataset_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!blank(line)) break;
    }
    if (blank(line)) throw ParseError(ParseErrorKind::EmptyFile, source_name + ": file is empty", 0, 0);
    const auto header = split_line(line, ',');
    if (header.size() < 2 || header.back() != "y") {
        throw ParseError(ParseErrorKind::MissingColumn, source_name + ": header must end with column 'y'", row, header.size());
    }
    Dataset d;
    d.n_features = header.size() - 1;
    while (std::getline(in, line)) {
        ++row;
        if (blank(line)) continue;
        auto cells = split_line(line, ',');
        if (cells.size() != header.size()) {
            throw ParseError(ParseErrorKind::MissingColumn,
                             source_name + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                 " cells, expected " + std::to_string(header.size()),
                             row, std::min(cells.size(), header.size()) + 1);
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            auto v = textio::parse_double(cells[c]);
            if (!v || !std::isfinite(*v)) {
                throw ParseError(ParseErrorKind::NonNumeric,
                                 source_name + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                                     ": '" + cells[c] + "' is not a finite number",
                                 row, c + 1);
            }
            (c + 1 == cells.size() ? d.targets : d.features).push_back(*v);
        }
    }
    if (d.targets.empty()) throw ParseError(ParseErrorKind::EmptyFile, source_name + ": no data rows", row, 0);
    return d;
}

// ---------------------------------------------------------------------------
// MLP baseline

const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& text) {
    if (text == "relu") return Activation::Relu;
    if (text == "tanh") return Activation::Tanh;
    throw ArgumentError("activation must be relu or tanh, got '" + text + "'");
}

std::size_t mlp_param_count(std::span<const std::size_t> widths) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
    return n;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_widths(std::span<const std::size_t> widths) {
    if (widths.size() < 2) throw StructuralError("MLP needs at least input and output widths");
    for (auto w : widths) {
        if (w < 1) throw StructuralError("MLP widths must be >= 1");
    }
}

RowMatrix scaled_inputs(const MlpModel& m, std::span<const double> features, std::size_t rows) {
    const std::size_t nf = m.config.widths.front();
    RowMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(nf));
    const Interval unit{-1.0, 1.0};
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < nf; ++j) {
            const double v = features[i * nf + j];
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                m.input_ranges.empty() ? v : m.input_ranges[j].map_to(unit, v);
        }
    }
    return x;
}

struct MlpPass {
    std::vector<RowMatrix> pre;   // pre-activations per layer
    std::vector<RowMatrix> post;  // post[0] = input
};

MlpPass mlp_pass(const MlpBaseline& cfg, std::span<const double> params, RowMatrix x) {
    MlpPass pass;
    pass.post.push_back(std::move(x));
    std::size_t offset = 0;
    const auto& w = cfg.widths;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(w[l]);
        const auto out = static_cast<Eigen::Index>(w[l + 1]);
        Eigen::Map<const RowMatrix> W(params.data() + offset, out, in);
        offset += w[l] * w[l + 1];
        Eigen::Map<const Eigen::RowVectorXd> b(params.data() + offset, out);
        offset += w[l + 1];
        RowMatrix z = (pass.post.back() * W.transpose()).rowwise() + b;
        RowMatrix a = z;
        if (l + 2 < w.size()) {
            a = cfg.activation == Activation::Tanh ? RowMatrix(z.array().tanh()) : RowMatrix(z.cwiseMax(0.0));
        }
        pass.pre.push_back(std::move(z));
        pass.post.push_back(std::move(a));
    }
    return pass;
}

}  // namespace

std::vector<double> MlpModel::forward_batch(std::span<const double> features) const {
    const std::size_t nf = config.widths.front();
    if (features.size() % nf != 0) throw StructuralError("feature matrix width does not match the MLP input");
    const std::size_t rows = features.size() / nf;
    auto pass = mlp_pass(config, params, scaled_inputs(*this, features, rows));
    const RowMatrix& y = pass.post.back();
    return std::vector<double>(y.data(), y.data() + y.size());
}

std::vector<double> MlpModel::forward(std::span<const double> features) const {
    if (features.size() != config.widths.front()) throw StructuralError("MLP input width mismatch");
    return forward_batch(features);
}

MlpModel mlp_init(const MlpBaseline& baseline, std::span<const Interval> input_ranges, std::uint64_t seed) {
    check_widths(baseline.widths);
    if (!input_ranges.empty() && input_ranges.size() != baseline.widths.front()) {
        throw StructuralError("one input range per MLP input required");
    }
    MlpModel m;
    m.config = baseline;
    m.input_ranges.assign(input_ranges.begin(), input_ranges.end());
    std::mt19937_64 rng(seed);
    const auto& w = baseline.widths;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (std::size_t i = 0; i < w[l] * w[l + 1]; ++i) m.params.push_back(u(rng));
        m.params.insert(m.params.end(), w[l + 1], 0.0);
    }
    return m;
}

Problem make_mlp_problem(const MlpModel& model, const Dataset& data, const TrainConfig& config) {
    data.validate();
    check_widths(model.config.widths);
    if (data.n_features != model.config.widths.front()) throw StructuralError("dataset width does not match the MLP input");
    if (model.config.widths.back() != 1) throw StructuralError("MLP baseline supports a single output");

    auto shared = std::make_shared<const std::pair<MlpModel, Dataset>>(model, data);
    Problem p;
    p.initial.add("mlp", model.params);
    p.samples = data.size();
    const bool classify = config.task == TaskKind::Classification;
    const double threshold = config.threshold;
    p.loss_grad = [shared, classify, threshold](std::span<const double> params, std::span<const std::size_t> batch,
                                                std::span<double> grad) {
        const auto& [m, d] = *shared;
        const std::size_t nf = d.n_features;
        std::vector<double> feats;
        feats.reserve(batch.size() * nf);
        Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto r = d.row(batch[i]);
            feats.insert(feats.end(), r.begin(), r.end());
            y(static_cast<Eigen::Index>(i)) = d.targets[batch[i]];
        }
        auto pass = mlp_pass(m.config, params, scaled_inputs(m, feats, batch.size()));
        const Eigen::VectorXd pred = pass.post.back().col(0);
        const Eigen::VectorXd err = pred - y;
        const double n = static_cast<double>(batch.size());
        LossEval ev;
        ev.data_loss = err.squaredNorm() / n;
        ev.objective = ev.data_loss;
        if (classify) {
            std::vector<double> pv(pred.data(), pred.data() + pred.size());
            std::vector<double> yv(y.data(), y.data() + y.size());
            ev.metric = classification_metrics(pv, yv, threshold);
        } else {
            ev.metric = ev.data_loss;
        }

        const auto& w = m.config.widths;
        std::vector<std::size_t> offsets;
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) {
            offsets.push_back(off);
            off += w[l] * w[l + 1] + w[l + 1];
        }
        RowMatrix delta = (2.0 / n) * err;  // d loss / d z for the linear output layer
        for (std::size_t l = w.size() - 1; l-- > 0;) {
            const auto in = static_cast<Eigen::Index>(w[l]);
            const auto out = static_cast<Eigen::Index>(w[l + 1]);
            Eigen::Map<RowMatrix> gW(grad.data() + offsets[l], out, in);
            Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + offsets[l] + w[l] * w[l + 1], out);
            gW.noalias() = delta.transpose() * pass.post[l];
            gb = delta.colwise().sum();
            if (l == 0) break;
            Eigen::Map<const RowMatrix> W(params.data() + offsets[l], out, in);
            RowMatrix up = delta * W;
            const RowMatrix& z = pass.pre[l - 1];
            if (m.config.activation == Activation::Tanh) {
                const RowMatrix& a = pass.post[l];
                delta = up.array() * (1.0 - a.array().square());
            } else {
                delta = up.array() * (z.array() > 0.0).cast<double>();
            }
        }
        return ev;
    };
    p.evaluate = [shared, classify, threshold](std::span<const double> params) {
        const auto& [m, d] = *shared;
        MlpModel mm = m;
        mm.params.assign(params.begin(), params.end());
        auto preds = mm.forward_batch(d.features);
        LossEval ev;
        ev.data_loss = mse_loss(preds, d.targets);
        ev.objective = ev.data_loss;
        ev.metric = classify ? classification_metrics(preds, d.targets, threshold) : ev.data_loss;
        return ev;
    };
    return p;
}

MlpTrainResult mlp_baseline_train(const MlpBaseline& baseline, const Dataset& data, const TrainConfig& config) {
    MlpTrainResult out;
    out.model = mlp_init(baseline, data.feature_ranges, config.seed);
    Problem p = make_mlp_problem(out.model, data, config);
    out.report = optimize(p, config);
    auto best = out.report.best_params.values();
    out.model.params.assign(best.begin(), best.end());
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

const char* to_string(Family f) {
    switch (f) {
        case Family::Akan: return "akan";
        case Family::MlpRelu: return "mlp_relu";
        case Family::MlpTanh: return "mlp_tanh";
    }
    return "?";
}

std::string SweepCell::network() const {
    auto s = format_widths(widths);
    return family == Family::Akan ? s + "x" + std::to_string(rnpus_per_ep) : s;
}

namespace {

using Widths = std::vector<std::size_t>;

void add_akan(SweepGrid& g, const std::vector<Widths>& nets, const std::vector<std::size_t>& ds) {
    for (const auto& w : nets) {
        for (auto d : ds) g.cells.push_back({Family::Akan, w, d});
    }
}

void add_mlp(SweepGrid& g, const std::vector<Widths>& nets) {
    for (auto fam : {Family::MlpRelu, Family::MlpTanh}) {
        for (const auto& w : nets) g.cells.push_back({fam, w, 0});
    }
}

}  // namespace

SweepGrid named_grid(const std::string& name) {
    SweepGrid g;
    g.name = name;
    if (name == "tables1-fig2d") {
        g.task = "bessel";
        add_akan(g, {{1, 1}}, {5, 10, 15, 20, 25, 30, 35, 40, 45, 50});
    } else if (name == "tables1-fig2e") {
        g.task = "exp2";
        add_akan(g,
                 {{2, 1, 1}, {2, 2, 1}, {2, 3, 1}, {2, 4, 1}, {2, 5, 1}, {2, 1, 1, 1}, {2, 2, 2, 1}, {2, 3, 3, 1},
                  {2, 4, 4, 1}, {2, 5, 5, 1}},
                 {1, 2, 3, 4, 5});
    } else if (name == "tables1-fig2f") {
        g.task = "exp4";
        add_akan(g,
                 {{4, 2, 1}, {4, 3, 1}, {4, 4, 1}, {4, 1, 1, 1}, {4, 2, 2, 1}, {4, 3, 3, 1}, {4, 4, 4, 1},
                  {4, 1, 1, 1, 1}, {4, 2, 2, 2, 1}, {4, 3, 3, 3, 1}, {4, 4, 4, 4, 1}},
                 {1, 2, 3});
    } else if (name == "tables2-fig2d") {
        g.task = "bessel";
        add_mlp(g, {{1, 50, 1}, {1, 100, 1}, {1, 150, 1}, {1, 200, 1}, {1, 250, 1}, {1, 300, 1}, {1, 350, 1}, {1, 400, 1}});
    } else if (name == "tables2-fig2e") {
        g.task = "exp2";
        add_mlp(g, {{2, 5, 1},
                    {2, 10, 1},
                    {2, 20, 1},
                    {2, 50, 1},
                    {2, 100, 1},
                    {2, 200, 1},
                    {2, 300, 1},
                    {2, 400, 1},
                    {2, 500, 1}});
    } else if (name == "tables2-fig2f") {
        g.task = "exp4";
        add_mlp(g, {{4, 50, 1},
                    {4, 100, 1},
                    {4, 150, 1},
                    {4, 200, 1},
                    {4, 250, 1},
                    {4, 300, 1},
                    {4, 10, 10, 1},
                    {4, 15, 15, 1},
                    {4, 20, 20, 1},
                    {4, 50, 50, 1},
                    {4, 200, 200, 1},
                    {4, 300, 300, 1},
                    {4, 400, 400, 1}});
    } else {
        throw ArgumentError("unknown grid '" + name + "'");
    }
    return g;
}

std::vector<std::string> named_grid_names() {
    return {"tables1-fig2d", "tables1-fig2e", "tables1-fig2f", "tables2-fig2d", "tables2-fig2e", "tables2-fig2f"};
}

std::vector<SweepRow> sweep(const RegressionTask& task, const SweepGrid& grid, std::shared_ptr<const DeviceModel> device,
                            const SweepOptions& options) {
    if (options.seeds.empty()) throw ArgumentError("sweep needs at least one seed");
    if (options.workers == 0) throw ArgumentError("sweep needs at least one worker");
    for (const auto& cell : grid.cells) {
        if (cell.widths.empty() || cell.widths.front() != task.arity) {
            throw StructuralError("grid cell " + cell.network() + " does not match task '" + task.name + "'");
        }
    }
    const RegressionData rd = make_regression_data(task, options.samples, options.data_seed);
    const std::size_t n_seeds = options.seeds.size();
    const std::size_t n_jobs = grid.cells.size() * n_seeds;
    std::vector<SweepRow> runs(n_jobs);

    auto run_one = [&](std::size_t job) {
        const auto& cell = grid.cells[job / n_seeds];
        const auto seed = options.seeds[job % n_seeds];
        const auto start = std::chrono::steady_clock::now();
        TrainConfig tc = options.train;
        tc.seed = seed;
        SweepRow row;
        row.cell = cell;
        row.seed = seed;
        if (cell.family == Family::Akan) {
            Topology t{cell.widths, cell.rnpus_per_ep, false};
            AkanModel m = random_init(t, device, seed);
            prepare_model(m, rd.data);
            row.params = trainable_parameter_count(m);
            row.mse = train(std::move(m), rd.data, tc).report.best_mse;
        } else {
            MlpBaseline b{cell.widths, cell.family == Family::MlpRelu ? Activation::Relu : Activation::Tanh};
            row.params = mlp_param_count(cell.widths);
            row.mse = mlp_baseline_train(b, rd.data, tc).report.best_mse;
        }
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        runs[job] = row;
    };

    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= n_jobs) return;
            try {
                run_one(job);
            } catch (...) {
                std::lock_guard lock(progress_mutex);
                if (!failure) failure = std::current_exception();
                next = n_jobs;
                return;
            }
            std::lock_guard lock(progress_mutex);
            if (options.progress) options.progress(runs[job]);
        }
    };
    const std::size_t n_threads = std::min(options.workers, n_jobs);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<SweepRow> rows;
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        std::vector<double> mses;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            rows.push_back(runs[c * n_seeds + s]);
            mses.push_back(rows.back().mse);
        }
        std::sort(mses.begin(), mses.end());
        SweepRow summary;
        summary.cell = grid.cells[c];
        summary.params = rows.back().params;
        summary.mse = mses.front();
        const std::size_t k = std::min<std::size_t>(5, mses.size());
        summary.top5_min = mses.front();
        summary.top5_max = mses[k - 1];
        rows.push_back(summary);
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    using textio::format_double;
    out << "family,network,d,params,seed,row,mse,accuracy,top5_min,top5_max\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : rows) {
        out << to_string(r.cell.family) << ",\"" << r.cell.network() << "\"," << r.cell.rnpus_per_ep << ',' << r.params
            << ',' << (r.seed ? std::to_string(*r.seed) : std::string()) << ',' << (r.seed ? "run" : "summary") << ','
            << format_double(r.mse) << ',' << opt(r.accuracy) << ',' << opt(r.top5_min) << ',' << opt(r.top5_max) << '\n';
    }
}

void write_sweep_timing_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "family,network,d,seed,wall_seconds\n";
    for (const auto& r : rows) {
        if (!r.seed) continue;
        out << to_string(r.cell.family) << ",\"" << r.cell.network() << "\"," << r.cell.rnpus_per_ep << ',' << *r.seed
            << ',' << textio::format_double(r.wall_seconds) << '\n';
    }
}

std::vector<SweepCsvRow> read_sweep_csv(std::istream& in, const std::string& source_name) {
    std::string line;
    std::size_t row = 0;
    if (!std::getline(in, line)) throw ParseError(ParseErrorKind::EmptyFile, source_name + ": file is empty");
    ++row;
    std::vector<SweepCsvRow> out;
    while (std::getline(in, line)) {
        ++row;
        if (blank(line)) continue;
        // the network column is quoted because it contains commas
        std::vector<std::string> cells;
        std::string cur;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') {
                quoted = !quoted;
            } else if (c == ',' && !quoted) {
                cells.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        cells.push_back(cur);
        if (cells.size() < 7) {
            throw ParseError(ParseErrorKind::MissingColumn, source_name + ": row " + std::to_string(row) + " is short", row,
                             cells.size() + 1);
        }
        SweepCsvRow r;
        r.family = cells[0];
        r.network = cells[1];
        auto num = [&](std::size_t c) {
            auto v = textio::parse_double(cells[c]);
            if (!v) {
                throw ParseError(ParseErrorKind::NonNumeric,
                                 source_name + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                                     " is not numeric",
                                 row, c + 1);
            }
            return *v;
        };
        r.d = static_cast<std::size_t>(num(2));
        r.params = static_cast<std::size_t>(num(3));
        r.seed = cells[4];
        r.row = cells[5];
        r.mse = num(6);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace akan

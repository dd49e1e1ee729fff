#include "akan/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

#include "akan/errors.hpp"
#include "akan/textio.hpp"

namespace akan {

double Interval::map_to(const Interval& target, double x) const noexcept {
    const double t = (x - lo) / (hi - lo);
    return (1.0 - t) * target.lo + t * target.hi;
}

ElectrodeRanges ElectrodeRanges::uniform(double v_min, double v_max) {
    ElectrodeRanges r;
    r.voltage.fill(Interval{v_min, v_max});
    r.validate();
    return r;
}

void ElectrodeRanges::validate() const {
    for (std::size_t e = 0; e < kElectrodes; ++e) {
        if (!(voltage[e].lo < voltage[e].hi) || !std::isfinite(voltage[e].lo) || !std::isfinite(voltage[e].hi)) {
            throw StructuralError("electrode " + std::to_string(e) + ": voltage range must satisfy v_min < v_max");
        }
    }
    if (!(current.lo < current.hi) || !std::isfinite(current.lo) || !std::isfinite(current.hi)) {
        throw StructuralError("current range must satisfy i_min < i_max");
    }
}

Interval ElectrodeRanges::common_voltage() const noexcept {
    Interval out{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const auto& v : voltage) {
        out.lo = std::max(out.lo, v.lo);
        out.hi = std::min(out.hi, v.hi);
    }
    return out;
}

void ElectrodeRanges::check(std::span<const double> v) const {
    if (v.size() != kElectrodes) {
        throw StructuralError("expected 7 electrode voltages, got " + std::to_string(v.size()));
    }
    for (std::size_t e = 0; e < kElectrodes; ++e) {
        if (!voltage[e].contains(v[e])) {
            throw RangeError("electrode " + std::to_string(e) + " voltage " + textio::format_double(v[e]) +
                             " outside [" + textio::format_double(voltage[e].lo) + ", " +
                             textio::format_double(voltage[e].hi) + "]");
        }
    }
}

const char* to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::Analytic: return "analytic";
        case DeviceKind::Mlp: return "mlp";
    }
    return "?";
}

DeviceModel::DeviceModel(ElectrodeRanges ranges) : ranges_(ranges) { ranges_.validate(); }

void DeviceModel::set_current_range(Interval current) {
    ranges_.current = current;
    ranges_.validate();
}

double DeviceModel::forward(std::span<const double> v) const {
    ranges_.check(v);
    return eval(v.data());
}

double DeviceModel::forward_with_gradient(std::span<const double> v, std::span<double, kElectrodes> gradient) const {
    ranges_.check(v);
    return eval_with_gradient(v.data(), gradient.data());
}

Var DeviceModel::record(Tape& tape, std::span<const Var, kElectrodes> v) const { return record_impl(tape, v); }

double DeviceModel::normalize(double current) const noexcept {
    return 2.0 * (current - ranges_.current.lo) / ranges_.current.width() - 1.0;
}

void DeviceModel::calibrate_current_range(std::uint64_t seed, std::size_t samples) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    ElectrodeVector v{};
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t e = 0; e < kElectrodes; ++e) {
            std::uniform_real_distribution<double> u(ranges_.voltage[e].lo, ranges_.voltage[e].hi);
            v[e] = u(rng);
        }
        const double i = eval(v.data());
        lo = std::min(lo, i);
        hi = std::max(hi, i);
    }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    set_current_range(Interval{lo, hi});
}

// ---------------------------------------------------------------------------
// AnalyticDevice

std::shared_ptr<const AnalyticDevice> AnalyticDevice::generate(std::uint64_t seed, std::size_t units,
                                                               ElectrodeRanges ranges) {
    if (units == 0) throw ArgumentError("AnalyticDevice: need at least one unit");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uw(-2.5, 2.5);
    std::uniform_real_distribution<double> ub(-1.0, 1.0);
    std::vector<double> a(units), w(units * kElectrodes), b(units);
    for (std::size_t j = 0; j < units; ++j) {
        for (std::size_t i = 0; i < kElectrodes; ++i) w[j * kElectrodes + i] = uw(rng);
        b[j] = ub(rng);
        a[j] = ub(rng);
    }
    auto device = std::make_shared<AnalyticDevice>(std::move(a), std::move(w), std::move(b), ranges);
    device->calibrate_current_range(seed, 4096);
    return device;
}

AnalyticDevice::AnalyticDevice(std::vector<double> a, std::vector<double> w, std::vector<double> b,
                               ElectrodeRanges ranges)
    : DeviceModel(ranges), a_(std::move(a)), w_(std::move(w)), b_(std::move(b)) {
    if (a_.empty() || b_.size() != a_.size() || w_.size() != a_.size() * kElectrodes) {
        throw StructuralError("AnalyticDevice: expected a[J], b[J], W[J x 7]");
    }
    auto finite = [](const std::vector<double>& xs) {
        return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(a_) || !finite(w_) || !finite(b_)) throw NumericalError("AnalyticDevice: non-finite coefficient");
}

double AnalyticDevice::eval(const double* v) const {
    double current = 0.0;
    for (std::size_t j = 0; j < a_.size(); ++j) {
        const double* row = &w_[j * kElectrodes];
        double z = b_[j];
        for (std::size_t i = 0; i < kElectrodes; ++i) z += row[i] * v[i];
        current += a_[j] * std::tanh(z);
    }
    return current;
}

double AnalyticDevice::eval_with_gradient(const double* v, double* gradient) const {
    std::fill(gradient, gradient + kElectrodes, 0.0);
    double current = 0.0;
    for (std::size_t j = 0; j < a_.size(); ++j) {
        const double* row = &w_[j * kElectrodes];
        double z = b_[j];
        for (std::size_t i = 0; i < kElectrodes; ++i) z += row[i] * v[i];
        const double t = std::tanh(z);
        current += a_[j] * t;
        const double slope = a_[j] * (1.0 - t * t);
        for (std::size_t i = 0; i < kElectrodes; ++i) gradient[i] += slope * row[i];
    }
    return current;
}

ElectrodeVector AnalyticDevice::analytic_gradient(std::span<const double> v) const {
    ranges().check(v);
    // dI/dv_i = sum_j a_j sech^2(z_j) W_ji, with sech^2 = 1 / cosh^2
    ElectrodeVector g{};
    for (std::size_t j = 0; j < a_.size(); ++j) {
        double z = b_[j];
        for (std::size_t i = 0; i < kElectrodes; ++i) z += w_[j * kElectrodes + i] * v[i];
        const double c = std::cosh(z);
        for (std::size_t i = 0; i < kElectrodes; ++i) g[i] += a_[j] * w_[j * kElectrodes + i] / (c * c);
    }
    return g;
}

Var AnalyticDevice::record_impl(Tape& tape, std::span<const Var, kElectrodes> v) const {
    std::vector<Var> hidden;
    hidden.reserve(a_.size());
    for (std::size_t j = 0; j < a_.size(); ++j) {
        Var z = tape.affine(v, std::span<const double>(&w_[j * kElectrodes], kElectrodes), b_[j]);
        hidden.push_back(tape.tanh(z));
    }
    return tape.affine(hidden, a_, 0.0);
}

// ---------------------------------------------------------------------------
// MlpSurrogate

namespace {

constexpr std::size_t kMaxWidth = 90;

void check_layers(const std::vector<DenseLayer>& layers) {
    constexpr auto& shape = MlpSurrogate::kShape;
    if (layers.size() != shape.size() - 1) {
        throw StructuralError("MlpSurrogate: expected " + std::to_string(shape.size() - 1) + " layers, got " +
                              std::to_string(layers.size()));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.inputs != shape[l] || L.outputs != shape[l + 1] || L.weights.size() != L.inputs * L.outputs ||
            L.bias.size() != L.outputs) {
            throw StructuralError("MlpSurrogate: layer " + std::to_string(l) + " has shape " +
                                  std::to_string(L.outputs) + "x" + std::to_string(L.inputs) + ", expected " +
                                  std::to_string(shape[l + 1]) + "x" + std::to_string(shape[l]));
        }
        auto finite = [](double x) { return std::isfinite(x); };
        if (!std::all_of(L.weights.begin(), L.weights.end(), finite) ||
            !std::all_of(L.bias.begin(), L.bias.end(), finite)) {
            throw NumericalError("MlpSurrogate: layer " + std::to_string(l) + " has a non-finite weight");
        }
    }
}

}  // namespace

std::shared_ptr<const MlpSurrogate> MlpSurrogate::generate(std::uint64_t seed, ElectrodeRanges ranges) {
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < kShape.size(); ++l) {
        DenseLayer L;
        L.inputs = kShape[l];
        L.outputs = kShape[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(L.inputs));
        std::uniform_real_distribution<double> uw(-limit, limit);
        std::uniform_real_distribution<double> ub(-0.1, 0.1);
        L.weights.resize(L.inputs * L.outputs);
        for (auto& w : L.weights) w = uw(rng);
        L.bias.resize(L.outputs);
        for (auto& b : L.bias) b = ub(rng);
        layers.push_back(std::move(L));
    }
    auto device = std::make_shared<MlpSurrogate>(std::move(layers), ranges);
    device->calibrate_current_range(seed, 4096);
    return device;
}

MlpSurrogate::MlpSurrogate(std::vector<DenseLayer> layers, ElectrodeRanges ranges)
    : DeviceModel(ranges), layers_(std::move(layers)) {
    check_layers(layers_);
}

double MlpSurrogate::eval(const double* v) const {
    std::array<double, kMaxWidth> buf_a{}, buf_b{};
    std::copy(v, v + kElectrodes, buf_a.begin());
    double* in = buf_a.data();
    double* out = buf_b.data();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        const bool hidden = l + 1 < layers_.size();
        for (std::size_t o = 0; o < L.outputs; ++o) {
            const double* row = &L.weights[o * L.inputs];
            double z = L.bias[o];
            for (std::size_t i = 0; i < L.inputs; ++i) z += row[i] * in[i];
            out[o] = hidden ? (z > 0.0 ? z : 0.0) : z;
        }
        std::swap(in, out);
    }
    return in[0];
}

double MlpSurrogate::eval_with_gradient(const double* v, double* gradient) const {
    const std::size_t n_layers = layers_.size();
    // activations[l] = input to layer l; pre-activation sign kept as a mask
    std::array<std::array<double, kMaxWidth>, 6> act{};
    std::array<std::array<bool, kMaxWidth>, 6> active{};
    std::copy(v, v + kElectrodes, act[0].begin());
    double result = 0.0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& L = layers_[l];
        const bool hidden = l + 1 < n_layers;
        for (std::size_t o = 0; o < L.outputs; ++o) {
            const double* row = &L.weights[o * L.inputs];
            double z = L.bias[o];
            for (std::size_t i = 0; i < L.inputs; ++i) z += row[i] * act[l][i];
            if (hidden) {
                active[l + 1][o] = z > 0.0;
                act[l + 1][o] = z > 0.0 ? z : 0.0;
            } else {
                result = z;
            }
        }
    }
    std::array<double, kMaxWidth> delta{}, next{};
    delta[0] = 1.0;
    for (std::size_t l = n_layers; l-- > 0;) {
        const auto& L = layers_[l];
        std::fill(next.begin(), next.begin() + L.inputs, 0.0);
        for (std::size_t o = 0; o < L.outputs; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* row = &L.weights[o * L.inputs];
            for (std::size_t i = 0; i < L.inputs; ++i) next[i] += d * row[i];
        }
        if (l > 0) {
            for (std::size_t i = 0; i < L.inputs; ++i) delta[i] = active[l][i] ? next[i] : 0.0;
        } else {
            std::copy(next.begin(), next.begin() + kElectrodes, gradient);
        }
    }
    return result;
}

Var MlpSurrogate::record_impl(Tape& tape, std::span<const Var, kElectrodes> v) const {
    std::vector<Var> in(v.begin(), v.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        const bool hidden = l + 1 < layers_.size();
        std::vector<Var> out;
        out.reserve(L.outputs);
        for (std::size_t o = 0; o < L.outputs; ++o) {
            Var z = tape.affine(in, std::span<const double>(&L.weights[o * L.inputs], L.inputs), L.bias[o]);
            out.push_back(hidden ? tape.relu(z) : z);
        }
        in = std::move(out);
    }
    return in[0];
}

// ---------------------------------------------------------------------------
// RNPU input assembly

std::size_t control_electrode(std::size_t input_electrode, std::size_t control) noexcept {
    return control < input_electrode ? control : control + 1;
}

ElectrodeVector assemble_rnpu_input(std::size_t input_electrode, std::span<const double> controls, double input_voltage) {
    if (controls.size() != kControls) {
        throw StructuralError("expected 6 control voltages, got " + std::to_string(controls.size()));
    }
    if (input_electrode >= kElectrodes) {
        throw StructuralError("input electrode " + std::to_string(input_electrode) + " out of 0..6");
    }
    return assemble_electrodes<double>(input_electrode, controls, input_voltage);
}

ElectrodeVector assemble_rnpu_input(const RnpuConfig& config, double input_voltage) {
    return assemble_rnpu_input(config.input_electrode, config.control_voltages, input_voltage);
}

DisassembledInput disassemble_rnpu_input(std::size_t input_electrode, const ElectrodeVector& v) {
    if (input_electrode >= kElectrodes) {
        throw StructuralError("input electrode " + std::to_string(input_electrode) + " out of 0..6");
    }
    DisassembledInput out{v[input_electrode], {}};
    for (std::size_t c = 0; c < kControls; ++c) out.controls[c] = v[control_electrode(input_electrode, c)];
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_matrix(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
                  std::span<const double> data) {
    out << "matrix " << name << ' ' << rows << ' ' << cols << '\n';
    for (std::size_t r = 0; r < rows; ++r) out << textio::join_doubles(data.subspan(r * cols, cols)) << '\n';
}

void write_vector(std::ostream& out, const std::string& name, std::span<const double> data) {
    out << "vector " << name << ' ' << data.size() << '\n' << textio::join_doubles(data) << '\n';
}

std::vector<double> read_matrix(textio::TokenReader& r, const std::string& name, std::size_t rows, std::size_t cols,
                                const std::string& context) {
    auto t = r.expect("matrix", 3);
    if (t[1] != name) r.fail(ParseErrorKind::Structural, "expected matrix " + name + ", found " + t[1]);
    const auto got_rows = r.count(t[2], "rows");
    const auto got_cols = r.count(t[3], "cols");
    if (got_rows != rows || got_cols != cols) {
        r.fail(ParseErrorKind::Structural, context + ": matrix " + name + " is " + std::to_string(got_rows) + "x" +
                                               std::to_string(got_cols) + ", expected " + std::to_string(rows) + "x" +
                                               std::to_string(cols));
    }
    return r.numbers(rows * cols, context + " matrix " + name);
}

std::vector<double> read_vector(textio::TokenReader& r, const std::string& name, std::size_t n,
                                const std::string& context) {
    auto t = r.expect("vector", 2);
    if (t[1] != name) r.fail(ParseErrorKind::Structural, "expected vector " + name + ", found " + t[1]);
    const auto got = r.count(t[2], "length");
    if (got != n) {
        r.fail(ParseErrorKind::Structural,
               context + ": vector " + name + " has length " + std::to_string(got) + ", expected " + std::to_string(n));
    }
    return r.numbers(n, context + " vector " + name);
}

}  // namespace

void write_device_body(const DeviceModel& model, std::ostream& out) {
    out << "kind " << to_string(model.kind()) << '\n';
    const auto& ranges = model.ranges();
    for (std::size_t e = 0; e < kElectrodes; ++e) {
        out << "electrode " << e << ' ' << textio::format_double(ranges.voltage[e].lo) << ' '
            << textio::format_double(ranges.voltage[e].hi) << '\n';
    }
    out << "current " << textio::format_double(ranges.current.lo) << ' ' << textio::format_double(ranges.current.hi)
        << '\n';
    if (const auto* a = dynamic_cast<const AnalyticDevice*>(&model)) {
        out << "units " << a->units() << '\n';
        write_matrix(out, "W", a->units(), kElectrodes, a->w());
        write_vector(out, "b", a->b());
        write_vector(out, "a", a->a());
    } else if (const auto* m = dynamic_cast<const MlpSurrogate*>(&model)) {
        out << "layers " << m->layers().size() << '\n';
        for (std::size_t l = 0; l < m->layers().size(); ++l) {
            const auto& L = m->layers()[l];
            write_matrix(out, "W" + std::to_string(l), L.outputs, L.inputs, L.weights);
            write_vector(out, "b" + std::to_string(l), L.bias);
        }
    } else {
        throw ArgumentError("save_device: unsupported device type");
    }
    out << "end\n";
}

void save_device(const DeviceModel& model, std::ostream& out) {
    out << "format akan-device\n";
    out << "version " << kDeviceSchemaVersion << '\n';
    write_device_body(model, out);
}

void save_device(const DeviceModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    save_device(model, out);
    if (!out) throw Error("failed writing " + path.string());
}

std::shared_ptr<const DeviceModel> read_device_body(textio::TokenReader& r) {
    auto kind = r.expect("kind", 1)[1];
    ElectrodeRanges ranges;
    for (std::size_t e = 0; e < kElectrodes; ++e) {
        auto t = r.expect("electrode", 3);
        if (r.count(t[1], "electrode index") != e) {
            r.fail(ParseErrorKind::Structural, "electrode ranges must be listed in order 0..6");
        }
        ranges.voltage[e] = Interval{r.finite_number(t[2], "v_min"), r.finite_number(t[3], "v_max")};
    }
    auto c = r.expect("current", 2);
    ranges.current = Interval{r.finite_number(c[1], "i_min"), r.finite_number(c[2], "i_max")};
    try {
        ranges.validate();
    } catch (const StructuralError& e) {
        r.fail(ParseErrorKind::Structural, e.what());
    }

    std::shared_ptr<const DeviceModel> device;
    if (kind == "analytic") {
        const auto units = r.count(r.expect("units", 1)[1], "units");
        if (units == 0) r.fail(ParseErrorKind::Structural, "analytic device needs at least one unit");
        auto w = read_matrix(r, "W", units, kElectrodes, "analytic device");
        auto b = read_vector(r, "b", units, "analytic device");
        auto a = read_vector(r, "a", units, "analytic device");
        device = std::make_shared<AnalyticDevice>(std::move(a), std::move(w), std::move(b), ranges);
    } else if (kind == "mlp") {
        const auto n_layers = r.count(r.expect("layers", 1)[1], "layers");
        const auto& shape = MlpSurrogate::kShape;
        if (n_layers != shape.size() - 1) {
            r.fail(ParseErrorKind::Structural,
                   "mlp surrogate needs " + std::to_string(shape.size() - 1) + " layers, found " + std::to_string(n_layers));
        }
        std::vector<DenseLayer> layers;
        for (std::size_t l = 0; l < n_layers; ++l) {
            DenseLayer L;
            L.inputs = shape[l];
            L.outputs = shape[l + 1];
            const std::string ctx = "layer " + std::to_string(l);
            L.weights = read_matrix(r, "W" + std::to_string(l), L.outputs, L.inputs, ctx);
            L.bias = read_vector(r, "b" + std::to_string(l), L.outputs, ctx);
            layers.push_back(std::move(L));
        }
        device = std::make_shared<MlpSurrogate>(std::move(layers), ranges);
    } else {
        r.fail(ParseErrorKind::Structural, "unknown device kind '" + kind + "'");
    }
    r.expect("end", 0);
    return device;
}

std::shared_ptr<const DeviceModel> load_device(std::istream& in, const std::string& source_name) {
    textio::TokenReader r(in, source_name);
    auto fmt = r.next("format");
    if (fmt.size() != 2 || fmt[0] != "format" || fmt[1] != "akan-device") {
        r.fail(ParseErrorKind::Syntax, "not an akan-device checkpoint");
    }
    auto ver = r.expect("version", 1);
    if (ver[1] != std::to_string(kDeviceSchemaVersion)) {
        r.fail(ParseErrorKind::SchemaVersion,
               "schema version " + ver[1] + " not supported (expected " + std::to_string(kDeviceSchemaVersion) + ")");
    }
    return read_device_body(r);
}

std::shared_ptr<const DeviceModel> load_device(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open device checkpoint " + path.string());
    return load_device(in, path.string());
}

}  // namespace akan

#include "akan/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "akan/errors.hpp"
#include "akan/textio.hpp"

namespace akan {

// ---------------------------------------------------------------------------
// Topology

void Topology::validate() const {
    if (widths.size() < 2) throw StructuralError("topology needs at least input and output widths");
    for (auto w : widths) {
        if (w < 1) throw StructuralError("topology widths must be >= 1");
    }
    if (rnpus_per_ep < 1) throw StructuralError("topology needs d >= 1 RNPUs per EP");
}

std::size_t Topology::ep_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1];
    return n;
}

std::vector<std::size_t> parse_widths(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ')) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
        throw StructuralError("widths must look like [n_I,...,n_O], got '" + std::string(text) + "'");
    }
    text = text.substr(1, text.size() - 2);
    std::vector<std::size_t> widths;
    while (true) {
        auto comma = text.find(',');
        auto item = trim(text.substr(0, comma));
        std::size_t w = 0;
        auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), w);
        if (item.empty() || ec != std::errc{} || end != item.data() + item.size()) {
            throw StructuralError("bad width '" + std::string(item) + "'");
        }
        widths.push_back(w);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return widths;
}

std::string format_widths(std::span<const std::size_t> widths) {
    std::string s = "[";
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(widths[i]);
    }
    return s + "]";
}

Topology Topology::parse(std::string_view text) {
    auto close = text.find(']');
    if (close == std::string_view::npos) throw StructuralError("topology must look like [2,1,1]x3");
    Topology t;
    t.widths = parse_widths(text.substr(0, close + 1));
    auto rest = text.substr(close + 1);
    if (rest.empty()) {
        t.rnpus_per_ep = 1;
    } else {
        if (rest.front() != 'x' && rest.front() != '_') throw StructuralError("topology suffix must be xD or _D");
        rest.remove_prefix(1);
        auto [end, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), t.rnpus_per_ep);
        if (rest.empty() || ec != std::errc{} || end != rest.data() + rest.size()) {
            throw StructuralError("bad RNPU count in topology '" + std::string(text) + "'");
        }
    }
    t.validate();
    return t;
}

std::string Topology::to_string() const { return format_widths(widths) + "x" + std::to_string(rnpus_per_ep); }

// ---------------------------------------------------------------------------
// Groups

const char* to_string(ParamGroup group) {
    switch (group) {
        case ParamGroup::Control: return "control";
        case ParamGroup::RnpuGain: return "rnpu_gain";
        case ParamGroup::PruningGain: return "pruning_gain";
        case ParamGroup::SkipGain: return "skip_gain";
        case ParamGroup::Scaler: return "scaler";
        case ParamGroup::NodeBias: return "node_bias";
        case ParamGroup::ReadoutGain: return "readout_gain";
        case ParamGroup::ReadoutOffset: return "readout_offset";
    }
    return "?";
}

namespace {
constexpr std::array<ParamGroup, 8> kAllGroups{ParamGroup::Control,     ParamGroup::RnpuGain, ParamGroup::PruningGain,
                                               ParamGroup::SkipGain,    ParamGroup::Scaler,   ParamGroup::NodeBias,
                                               ParamGroup::ReadoutGain, ParamGroup::ReadoutOffset};

bool* group_flag(TrainableGroups& g, ParamGroup group) {
    switch (group) {
        case ParamGroup::Control: return &g.control;
        case ParamGroup::RnpuGain: return &g.rnpu_gain;
        case ParamGroup::PruningGain: return &g.pruning_gain;
        case ParamGroup::SkipGain: return &g.skip_gain;
        case ParamGroup::Scaler: return &g.scaler;
        case ParamGroup::NodeBias: return &g.node_bias;
        case ParamGroup::ReadoutGain: return &g.readout_gain;
        case ParamGroup::ReadoutOffset: return &g.readout_offset;
    }
    return nullptr;
}
}  // namespace

bool TrainableGroups::enabled(ParamGroup group) const noexcept {
    auto copy = *this;
    return *group_flag(copy, group);
}

std::string TrainableGroups::to_string() const {
    std::string s;
    for (auto g : kAllGroups) {
        if (!enabled(g)) continue;
        if (!s.empty()) s += ',';
        s += akan::to_string(g);
    }
    return s.empty() ? "none" : s;
}

TrainableGroups TrainableGroups::parse(std::string_view text) {
    TrainableGroups out;
    for (auto g : kAllGroups) *group_flag(out, g) = false;
    if (text == "none") return out;
    while (!text.empty()) {
        auto comma = text.find(',');
        auto name = text.substr(0, comma);
        bool found = false;
        for (auto g : kAllGroups) {
            if (name == akan::to_string(g)) {
                *group_flag(out, g) = true;
                found = true;
            }
        }
        if (!found) throw ArgumentError("unknown parameter group '" + std::string(name) + "'");
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

TrainableGroups TrainableGroups::only(std::initializer_list<ParamGroup> groups) {
    TrainableGroups out;
    for (auto g : kAllGroups) *group_flag(out, g) = false;
    for (auto g : groups) *group_flag(out, g) = true;
    return out;
}

ClampStats& ClampStats::operator+=(const ClampStats& other) noexcept {
    input_clamps += other.input_clamps;
    intermediate_clamps += other.intermediate_clamps;
    return *this;
}

double encode_input(double feature, const InputEncoder& encoder, const Interval& voltage, ClampStats* stats) {
    if (!(encoder.feature.lo < encoder.feature.hi)) throw ArgumentError("encoder needs x_min < x_max");
    if (feature < encoder.feature.lo || feature > encoder.feature.hi) {
        if (stats) ++stats->input_clamps;
        feature = std::clamp(feature, encoder.feature.lo, encoder.feature.hi);
    }
    return encoder.feature.map_to(voltage, feature);
}

// ---------------------------------------------------------------------------
// AkanModel

std::size_t AkanModel::active_ep_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : params.layers) {
        for (const auto& e : layer.edges) n += e.has_value();
    }
    return n;
}

std::size_t AkanModel::active_rnpu_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : params.layers) {
        for (const auto& e : layer.edges) {
            if (e) n += e->rnpus.size();
        }
    }
    return n;
}

void AkanModel::validate() const {
    topology.validate();
    if (!device) throw StructuralError("model has no device");
    if (encoders.size() != topology.inputs()) throw StructuralError("one input encoder per input feature required");
    if (params.layers.size() != topology.edge_layers()) throw StructuralError("layer count does not match topology");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& L = params.layers[l];
        const bool last = l + 1 == params.layers.size();
        if (L.n_in != topology.widths[l] || L.n_out != topology.widths[l + 1] || L.edges.size() != L.n_in * L.n_out ||
            L.bias.size() != L.n_out || L.scalers.size() != (last ? 0 : L.n_out)) {
            throw StructuralError("layer " + std::to_string(l) + " grid does not match topology " + topology.to_string());
        }
        for (const auto& e : L.edges) {
            if (!e) continue;
            if (e->rnpus.empty()) throw StructuralError("edge processor without RNPUs in layer " + std::to_string(l));
            for (const auto& r : e->rnpus) {
                if (r.input_electrode >= kElectrodes) throw StructuralError("input electrode out of 0..6");
            }
        }
    }
    if (params.readout_gain.size() != topology.outputs() || params.readout_offset.size() != topology.outputs()) {
        throw StructuralError("readout size does not match output width");
    }
}

ParamSet collect_params(const AkanModel& model) {
    ParamSet ps;
    auto params = model.params;  // for_each_scalar needs a mutable reference
    const auto& voltage = model.device->ranges().voltage;
    // Build names alongside the canonical-order visit.
    std::size_t counter = 0;
    for_each_scalar(std::span<const Interval, kElectrodes>(voltage), params,
                    [&](ParamGroup g, double& value, Bounds b) {
                        if (model.trainable.enabled(g)) {
                            ps.add(std::string(to_string(g)) + "#" + std::to_string(counter), value, b);
                        }
                        ++counter;
                    });
    return ps;
}

void assign_params(AkanModel& model, const ParamSet& ps) {
    const auto& voltage = model.device->ranges().voltage;
    std::size_t next = 0;
    auto values = ps.values();
    for_each_scalar(std::span<const Interval, kElectrodes>(voltage), model.params,
                    [&](ParamGroup g, double& value, Bounds) {
                        if (!model.trainable.enabled(g)) return;
                        if (next >= values.size()) throw StructuralError("assign_params: ParamSet too short");
                        value = values[next++];
                    });
    if (next != values.size()) throw StructuralError("assign_params: ParamSet too long");
}

std::size_t trainable_parameter_count(const AkanModel& model) { return collect_params(model).size(); }

BasicParams<Var> lift_params(const AkanModel& model, Tape& tape, std::span<const Var> leaves) {
    std::size_t next = 0;
    auto out = transform_params<Var>(model.params, [&](ParamGroup g, double value) -> Var {
        if (model.trainable.enabled(g)) {
            if (next >= leaves.size()) throw StructuralError("lift_params: not enough leaves");
            return leaves[next++];
        }
        return tape.constant(value);
    });
    if (next != leaves.size()) throw StructuralError("lift_params: too many leaves");
    return out;
}

// ---------------------------------------------------------------------------
// Forward

double device_normalized(const DeviceModel& device, std::span<const double, kElectrodes> v) {
    return device.normalize(device.forward(v));
}

Var device_normalized(const DeviceModel& device, std::span<const Var, kElectrodes> v) {
    ElectrodeVector values{};
    for (std::size_t e = 0; e < kElectrodes; ++e) values[e] = v[e].value();
    ElectrodeVector grad{};
    const double current = device.forward_with_gradient(values, grad);
    const double slope = device.normalization_slope();
    for (auto& g : grad) g *= slope;
    return v[0].tape()->custom(v, device.normalize(current), grad);
}

std::vector<double> encode_features(const AkanModel& model, std::span<const double> features, ClampStats* stats) {
    if (features.size() != model.topology.inputs()) {
        throw StructuralError("expected " + std::to_string(model.topology.inputs()) + " features, got " +
                              std::to_string(features.size()));
    }
    const Interval voltage = model.voltage_range();
    std::vector<double> encoded(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) encoded[i] = encode_input(features[i], model.encoders[i], voltage, stats);
    return encoded;
}

double ep_forward(const EdgeProcessor& ep, double v_in, const DeviceModel& device) {
    if (ep.rnpus.empty() && !ep.skip_gain) return 0.0;
    return edge_forward(ep, v_in, RnpuSite{0, 0, 0, 0}, [&](const RnpuSite&, const ElectrodeVector& e) {
        return device_normalized(device, e);
    });
}

std::vector<double> akan_forward(const AkanModel& model, std::span<const double> features, ClampStats* stats,
                                 ForwardTrace<double>* trace) {
    ClampStats local;
    ClampStats& s = stats ? *stats : local;
    auto encoded = encode_features(model, features, &s);
    const DeviceModel& device = *model.device;
    return network_forward(
        model, model.params, std::move(encoded),
        [&](const RnpuSite&, const ElectrodeVector& e) { return device_normalized(device, e); }, s, trace);
}

std::vector<Var> akan_forward_taped(const AkanModel& model, const BasicParams<Var>& p, Tape& tape,
                                    std::span<const double> features, ClampStats* stats, DeviceTaping taping) {
    ClampStats local;
    ClampStats& s = stats ? *stats : local;
    auto encoded = encode_features(model, features, &s);
    std::vector<Var> inputs;
    inputs.reserve(encoded.size());
    for (double v : encoded) inputs.push_back(tape.constant(v));
    const DeviceModel& device = *model.device;
    if (taping == DeviceTaping::Fused) {
        return network_forward(
            model, p, std::move(inputs),
            [&](const RnpuSite&, const std::array<Var, kElectrodes>& e) { return device_normalized(device, e); }, s);
    }
    const double slope = device.normalization_slope();
    const double lo = device.ranges().current.lo;
    return network_forward(
        model, p, std::move(inputs),
        [&](const RnpuSite&, const std::array<Var, kElectrodes>& e) {
            Var current = device.record(tape, e);
            return tape.scale(current, slope, -lo * slope - 1.0);
        },
        s);
}

std::vector<double> akan_forward_batch(const AkanModel& model, std::span<const double> features, ClampStats* stats) {
    const std::size_t nf = model.topology.inputs();
    if (features.size() % nf != 0) throw StructuralError("feature matrix size is not a multiple of the input width");
    std::vector<double> out;
    out.reserve(features.size() / nf * model.topology.outputs());
    for (std::size_t i = 0; i < features.size(); i += nf) {
        auto y = akan_forward(model, features.subspan(i, nf), stats);
        out.insert(out.end(), y.begin(), y.end());
    }
    return out;
}

AkanModel random_init(const Topology& topology, std::shared_ptr<const DeviceModel> device, std::uint64_t seed) {
    topology.validate();
    if (!device) throw ArgumentError("random_init: device required");
    AkanModel m;
    m.topology = topology;
    m.device = std::move(device);
    m.encoders.assign(topology.inputs(), InputEncoder{});
    const auto& ranges = m.device->ranges();
    const Interval voltage = m.voltage_range();

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_electrode(0, kElectrodes - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> gain(-1.0, 1.0);

    for (std::size_t l = 0; l < topology.edge_layers(); ++l) {
        BasicLayer<double> L;
        L.n_in = topology.widths[l];
        L.n_out = topology.widths[l + 1];
        for (std::size_t i = 0; i < L.n_in * L.n_out; ++i) {
            EdgeProcessor ep;
            ep.k = 1.0;
            for (std::size_t r = 0; r < topology.rnpus_per_ep; ++r) {
                BasicRnpu<double> rn;
                rn.input_electrode = pick_electrode(rng);
                for (std::size_t c = 0; c < kControls; ++c) {
                    const Interval& v = ranges.voltage[control_electrode(rn.input_electrode, c)];
                    rn.controls[c] = v.lo + unit(rng) * v.width();
                }
                rn.gain = gain(rng);
                ep.rnpus.push_back(rn);
            }
            if (topology.skip_connections) ep.skip_gain = 0.0;
            L.edges.emplace_back(std::move(ep));
        }
        if (l + 1 < topology.edge_layers()) L.scalers.assign(L.n_out, IvScaler{voltage.lo, voltage.hi});
        L.bias.assign(L.n_out, 0.0);
        m.params.layers.push_back(std::move(L));
    }
    m.params.readout_gain.assign(topology.outputs(), 1.0);
    m.params.readout_offset.assign(topology.outputs(), 0.0);
    return m;
}

void calibrate_scalers(AkanModel& model, std::span<const double> features, std::size_t n_features) {
    if (n_features != model.topology.inputs() || features.empty() || features.size() % n_features != 0) {
        throw StructuralError("calibrate_scalers: feature matrix does not match the input width");
    }
    const std::size_t n = features.size() / n_features;
    const std::size_t hidden_layers = model.params.layers.size() - 1;
    for (std::size_t l = 0; l < hidden_layers; ++l) {
        auto& L = model.params.layers[l];
        std::vector<double> lo(L.n_out, std::numeric_limits<double>::infinity());
        std::vector<double> hi(L.n_out, -std::numeric_limits<double>::infinity());
        for (std::size_t s = 0; s < n; ++s) {
            ForwardTrace<double> trace;
            akan_forward(model, features.subspan(s * n_features, n_features), nullptr, &trace);
            for (std::size_t dst = 0; dst < L.n_out; ++dst) {
                lo[dst] = std::min(lo[dst], trace.node_sums[l][dst]);
                hi[dst] = std::max(hi[dst], trace.node_sums[l][dst]);
            }
        }
        for (std::size_t dst = 0; dst < L.n_out; ++dst) {
            double a = lo[dst], b = hi[dst];
            double span = b - a;
            if (!(span > 1e-12)) {
                // constant node: centre a unit-width interval on it
                const double mid = 0.5 * (a + b);
                a = mid - 0.5;
                b = mid + 0.5;
                span = 1.0;
            }
            L.scalers[dst] = IvScaler{a - model.scaler_margin * span, b + model.scaler_margin * span};
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_model(const AkanModel& model, std::ostream& out, const std::string& device_ref) {
    model.validate();
    using textio::format_double;
    out << "format akan-model\n";
    out << "version " << kModelSchemaVersion << '\n';
    out << "topology " << model.topology.to_string() << ' ' << (model.topology.skip_connections ? "skip" : "noskip")
        << '\n';
    out << "scaler_margin " << format_double(model.scaler_margin) << '\n';
    out << "trainable " << model.trainable.to_string() << '\n';
    if (device_ref.empty()) {
        out << "device inline\n";
        write_device_body(*model.device, out);
    } else {
        out << "device file " << device_ref << '\n';
    }
    for (std::size_t i = 0; i < model.encoders.size(); ++i) {
        out << "encoder " << i << ' ' << format_double(model.encoders[i].feature.lo) << ' '
            << format_double(model.encoders[i].feature.hi) << '\n';
    }
    for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
        const auto& L = model.params.layers[l];
        out << "layer " << l << ' ' << L.n_in << ' ' << L.n_out << '\n';
        for (std::size_t src = 0; src < L.n_in; ++src) {
            for (std::size_t dst = 0; dst < L.n_out; ++dst) {
                const auto& e = L.edge(src, dst);
                if (!e) continue;
                out << "edge " << src << ' ' << dst << ' ' << format_double(e->k) << ' '
                    << (e->skip_gain ? format_double(*e->skip_gain) : std::string("none")) << ' ' << e->rnpus.size()
                    << '\n';
                for (const auto& r : e->rnpus) {
                    out << "rnpu " << r.input_electrode << ' ' << format_double(r.gain) << ' '
                        << textio::join_doubles(r.controls) << '\n';
                }
            }
        }
        for (std::size_t dst = 0; dst < L.scalers.size(); ++dst) {
            out << "scaler " << dst << ' ' << format_double(L.scalers[dst].lo) << ' '
                << format_double(L.scalers[dst].hi) << '\n';
        }
        for (std::size_t dst = 0; dst < L.bias.size(); ++dst) {
            out << "bias " << dst << ' ' << format_double(L.bias[dst]) << '\n';
        }
    }
    for (std::size_t o = 0; o < model.params.readout_gain.size(); ++o) {
        out << "readout " << o << ' ' << format_double(model.params.readout_gain[o]) << ' '
            << format_double(model.params.readout_offset[o]) << '\n';
    }
    out << "end\n";
}

void save_model(const AkanModel& model, const std::filesystem::path& path, const std::string& device_ref) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    save_model(model, out, device_ref);
    if (!out) throw Error("failed writing " + path.string());
}

AkanModel load_model(std::istream& in, const std::filesystem::path& base_dir, const std::string& source_name) {
    textio::TokenReader r(in, source_name);
    auto fmt = r.next("format");
    if (fmt.size() != 2 || fmt[0] != "format" || fmt[1] != "akan-model") r.fail(ParseErrorKind::Syntax, "not an akan-model checkpoint");
    auto ver = r.expect("version", 1);
    if (ver[1] != std::to_string(kModelSchemaVersion)) {
        r.fail(ParseErrorKind::SchemaVersion, "schema version " + ver[1] + " not supported (expected " +
                                                  std::to_string(kModelSchemaVersion) + ")");
    }
    AkanModel m;
    auto topo = r.expect("topology", 2);
    try {
        m.topology = Topology::parse(topo[1]);
    } catch (const StructuralError& e) {
        r.fail(ParseErrorKind::Structural, e.what());
    }
    if (topo[2] != "skip" && topo[2] != "noskip") r.fail(ParseErrorKind::Syntax, "expected skip|noskip");
    m.topology.skip_connections = topo[2] == "skip";
    m.scaler_margin = r.finite_number(r.expect("scaler_margin", 1)[1], "scaler_margin");
    try {
        m.trainable = TrainableGroups::parse(r.expect("trainable", 1)[1]);
    } catch (const ArgumentError& e) {
        r.fail(ParseErrorKind::Syntax, e.what());
    }

    auto dev = r.next("device");
    if (dev.size() >= 2 && dev[0] == "device" && dev[1] == "inline" && dev.size() == 2) {
        m.device = read_device_body(r);
    } else if (dev.size() == 3 && dev[0] == "device" && dev[1] == "file") {
        std::filesystem::path p(dev[2]);
        if (p.is_relative()) p = base_dir / p;
        m.device = load_device(p);
    } else {
        r.fail(ParseErrorKind::Structural, "expected 'device inline' or 'device file <path>'");
    }

    const Interval voltage = m.voltage_range();
    for (std::size_t i = 0; i < m.topology.inputs(); ++i) {
        auto t = r.expect("encoder", 3);
        if (r.count(t[1], "encoder index") != i) r.fail(ParseErrorKind::Structural, "encoders must be listed in order");
        m.encoders.push_back(InputEncoder{Interval{r.finite_number(t[2], "x_min"), r.finite_number(t[3], "x_max")}});
        if (!(m.encoders.back().feature.lo < m.encoders.back().feature.hi)) {
            r.fail(ParseErrorKind::Structural, "encoder needs x_min < x_max");
        }
    }

    auto tokens = r.next("layer");
    for (std::size_t l = 0; l < m.topology.edge_layers(); ++l) {
        if (tokens[0] != "layer" || tokens.size() != 4) r.fail(ParseErrorKind::Structural, "expected 'layer <l> <n_in> <n_out>'");
        BasicLayer<double> L;
        if (r.count(tokens[1], "layer index") != l) r.fail(ParseErrorKind::Structural, "layers must be listed in order");
        L.n_in = r.count(tokens[2], "n_in");
        L.n_out = r.count(tokens[3], "n_out");
        if (L.n_in != m.topology.widths[l] || L.n_out != m.topology.widths[l + 1]) {
            r.fail(ParseErrorKind::Structural, "layer " + std::to_string(l) + " shape does not match topology");
        }
        L.edges.resize(L.n_in * L.n_out);
        const bool last = l + 1 == m.topology.edge_layers();
        if (!last) L.scalers.assign(L.n_out, IvScaler{voltage.lo, voltage.hi});
        L.bias.assign(L.n_out, 0.0);
        std::vector<bool> seen_scaler(L.n_out, false);
        tokens = r.next("edge, scaler, bias, layer or readout");
        while (tokens[0] == "edge" || tokens[0] == "scaler" || tokens[0] == "bias") {
            if (tokens[0] == "edge") {
                if (tokens.size() != 6) r.fail(ParseErrorKind::Structural, "edge takes 5 values");
                const auto src = r.count(tokens[1], "src");
                const auto dst = r.count(tokens[2], "dst");
                if (src >= L.n_in || dst >= L.n_out) r.fail(ParseErrorKind::Structural, "edge index out of range");
                EdgeProcessor ep;
                ep.k = r.finite_number(tokens[3], "k");
                if (tokens[4] != "none") ep.skip_gain = r.finite_number(tokens[4], "skip gain");
                const auto n_rnpus = r.count(tokens[5], "rnpu count");
                if (n_rnpus == 0) r.fail(ParseErrorKind::Structural, "edge processor needs at least one RNPU");
                for (std::size_t k = 0; k < n_rnpus; ++k) {
                    auto rt = r.expect("rnpu", 2 + kControls);
                    BasicRnpu<double> rn;
                    rn.input_electrode = r.count(rt[1], "input electrode");
                    if (rn.input_electrode >= kElectrodes) r.fail(ParseErrorKind::Structural, "input electrode out of 0..6");
                    rn.gain = r.finite_number(rt[2], "gain");
                    for (std::size_t c = 0; c < kControls; ++c) rn.controls[c] = r.finite_number(rt[3 + c], "control voltage");
                    ep.rnpus.push_back(rn);
                }
                L.edge(src, dst) = std::move(ep);
            } else if (tokens[0] == "scaler") {
                if (tokens.size() != 4 || last) r.fail(ParseErrorKind::Structural, "unexpected scaler line");
                const auto dst = r.count(tokens[1], "dst");
                if (dst >= L.n_out) r.fail(ParseErrorKind::Structural, "scaler index out of range");
                L.scalers[dst] = IvScaler{r.finite_number(tokens[2], "scaler lo"), r.finite_number(tokens[3], "scaler hi")};
                seen_scaler[dst] = true;
            } else {
                if (tokens.size() != 3) r.fail(ParseErrorKind::Structural, "bias takes 2 values");
                const auto dst = r.count(tokens[1], "dst");
                if (dst >= L.n_out) r.fail(ParseErrorKind::Structural, "bias index out of range");
                L.bias[dst] = r.finite_number(tokens[2], "bias");
            }
            tokens = r.next("edge, scaler, bias, layer or readout");
        }
        m.params.layers.push_back(std::move(L));
    }
    for (std::size_t o = 0; o < m.topology.outputs(); ++o) {
        if (tokens[0] != "readout" || tokens.size() != 4) r.fail(ParseErrorKind::Structural, "expected 'readout <o> <gain> <offset>'");
        if (r.count(tokens[1], "readout index") != o) r.fail(ParseErrorKind::Structural, "readouts must be listed in order");
        m.params.readout_gain.push_back(r.finite_number(tokens[2], "readout gain"));
        m.params.readout_offset.push_back(r.finite_number(tokens[3], "readout offset"));
        tokens = r.next(o + 1 < m.topology.outputs() ? "readout" : "end");
    }
    if (tokens.size() != 1 || tokens[0] != "end") r.fail(ParseErrorKind::Structural, "expected 'end'");
    m.validate();
    return m;
}

AkanModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model checkpoint " + path.string());
    return load_model(in, path.parent_path(), path.string());
}

}  // namespace akan

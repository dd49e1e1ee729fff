#pragma once
// Analog KAN topologies: input encoders, edge processors (EPs) on every layer-to-layer
// edge, node summation, inter-layer I/V scaling and a linear readout.
//
// All trainable scalars live in BasicParams<T>. The same forward code runs with
// T = double (plain inference) and T = Var (taped for gradients); the device call is
// supplied by the caller so the remote time-multiplexed client can reuse it.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "akan/autodiff.hpp"
#include "akan/surrogate.hpp"

namespace akan {

/// Widths [n_I, n_H1, ..., n_O] and RNPUs per EP. Written "[2,1,1]x3" (or "[2,1,1]_3").
struct Topology {
    std::vector<std::size_t> widths;
    std::size_t rnpus_per_ep = 1;
    bool skip_connections = false;

    /// Throws StructuralError unless >= 2 widths, all >= 1, and d >= 1.
    void validate() const;
    std::size_t edge_layers() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
    std::size_t ep_count() const noexcept;
    std::size_t inputs() const noexcept { return widths.front(); }
    std::size_t outputs() const noexcept { return widths.back(); }

    static Topology parse(std::string_view text);
    std::string to_string() const;
};

/// Parses "[2,5,1]" into widths (used for MLP baselines as well).
std::vector<std::size_t> parse_widths(std::string_view text);
std::string format_widths(std::span<const std::size_t> widths);

template <class T>
struct BasicRnpu {
    std::size_t input_electrode = 0;
    std::array<T, kControls> controls{};
    T gain{};
};

template <class T>
struct BasicEdge {
    std::vector<BasicRnpu<T>> rnpus;
    std::optional<T> skip_gain;
    T k{};  // pruning gain
};

/// Maps a node sum from [lo, hi] onto the device's common input-voltage range.
template <class T>
struct BasicScaler {
    T lo{};
    T hi{};
};

template <class T>
struct BasicLayer {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::vector<std::optional<BasicEdge<T>>> edges;  // index src * n_out + dst; nullopt = removed
    std::vector<BasicScaler<T>> scalers;              // one per dst node, empty on the last layer
    std::vector<T> bias;                              // one per dst node

    std::optional<BasicEdge<T>>& edge(std::size_t src, std::size_t dst) { return edges[src * n_out + dst]; }
    const std::optional<BasicEdge<T>>& edge(std::size_t src, std::size_t dst) const { return edges[src * n_out + dst]; }
};

template <class T>
struct BasicParams {
    std::vector<BasicLayer<T>> layers;
    std::vector<T> readout_gain;
    std::vector<T> readout_offset;
};

using EdgeProcessor = BasicEdge<double>;
using IvScaler = BasicScaler<double>;
using NetworkParams = BasicParams<double>;

enum class ParamGroup : std::uint8_t { Control, RnpuGain, PruningGain, SkipGain, Scaler, NodeBias, ReadoutGain, ReadoutOffset };
const char* to_string(ParamGroup group);

/// Which parameter groups are registered in the ParamSet (and so trained).
struct TrainableGroups {
    bool control = true;
    bool rnpu_gain = true;
    bool pruning_gain = false;
    bool skip_gain = true;
    bool scaler = false;
    bool node_bias = false;
    bool readout_gain = false;
    bool readout_offset = false;

    bool enabled(ParamGroup group) const noexcept;
    /// Comma-separated group names, e.g. "control,rnpu_gain".
    std::string to_string() const;
    static TrainableGroups parse(std::string_view text);
    /// Only the given groups enabled.
    static TrainableGroups only(std::initializer_list<ParamGroup> groups);
};

/// Per-feature affine map [x_min, x_max] -> device input-voltage range.
struct InputEncoder {
    Interval feature{-1.0, 1.0};
};

/// Counts of values pushed onto a range boundary during evaluation.
struct ClampStats {
    std::uint64_t input_clamps = 0;
    std::uint64_t intermediate_clamps = 0;

    std::uint64_t total() const noexcept { return input_clamps + intermediate_clamps; }
    ClampStats& operator+=(const ClampStats& other) noexcept;
};

/// Input feature -> voltage. Out-of-range features are clamped and counted.
double encode_input(double feature, const InputEncoder& encoder, const Interval& voltage, ClampStats* stats = nullptr);

struct AkanModel {
    Topology topology;
    std::shared_ptr<const DeviceModel> device;
    std::vector<InputEncoder> encoders;
    NetworkParams params;
    TrainableGroups trainable;
    /// Fractional widening of the calibrated scaler source interval on each side.
    double scaler_margin = 0.05;

    Interval voltage_range() const noexcept { return device->ranges().common_voltage(); }
    std::size_t active_ep_count() const noexcept;
    std::size_t active_rnpu_count() const noexcept;
    /// Throws StructuralError if the parameter grid does not match the topology.
    void validate() const;
};

/// Visits every scalar of `p` in canonical order, passing (group, value, bounds).
/// Control bounds are the range of the electrode the control drives; all others are unbounded.
template <class T, class F>
void for_each_scalar(std::span<const Interval, kElectrodes> voltage, BasicParams<T>& p, F&& f) {
    for (auto& layer : p.layers) {
        for (auto& slot : layer.edges) {
            if (!slot) continue;
            for (auto& r : slot->rnpus) {
                for (std::size_t c = 0; c < kControls; ++c) {
                    const Interval& v = voltage[control_electrode(r.input_electrode, c)];
                    f(ParamGroup::Control, r.controls[c], Bounds{v.lo, v.hi});
                }
                f(ParamGroup::RnpuGain, r.gain, Bounds{});
            }
            f(ParamGroup::PruningGain, slot->k, Bounds{});
            if (slot->skip_gain) f(ParamGroup::SkipGain, *slot->skip_gain, Bounds{});
        }
        for (auto& s : layer.scalers) {
            f(ParamGroup::Scaler, s.lo, Bounds{});
            f(ParamGroup::Scaler, s.hi, Bounds{});
        }
        for (auto& b : layer.bias) f(ParamGroup::NodeBias, b, Bounds{});
    }
    for (auto& g : p.readout_gain) f(ParamGroup::ReadoutGain, g, Bounds{});
    for (auto& o : p.readout_offset) f(ParamGroup::ReadoutOffset, o, Bounds{});
}

/// Same structure with every scalar converted by `f(group, const T&) -> U`, visited in canonical order.
template <class U, class T, class F>
BasicParams<U> transform_params(const BasicParams<T>& p, F&& f) {
    BasicParams<U> out;
    out.layers.reserve(p.layers.size());
    for (const auto& layer : p.layers) {
        BasicLayer<U> L;
        L.n_in = layer.n_in;
        L.n_out = layer.n_out;
        L.edges.reserve(layer.edges.size());
        for (const auto& slot : layer.edges) {
            if (!slot) {
                L.edges.emplace_back();
                continue;
            }
            BasicEdge<U> e;
            e.rnpus.reserve(slot->rnpus.size());
            for (const auto& r : slot->rnpus) {
                BasicRnpu<U> ru;
                ru.input_electrode = r.input_electrode;
                for (std::size_t c = 0; c < kControls; ++c) ru.controls[c] = f(ParamGroup::Control, r.controls[c]);
                ru.gain = f(ParamGroup::RnpuGain, r.gain);
                e.rnpus.push_back(ru);
            }
            e.k = f(ParamGroup::PruningGain, slot->k);
            if (slot->skip_gain) e.skip_gain = f(ParamGroup::SkipGain, *slot->skip_gain);
            L.edges.emplace_back(std::move(e));
        }
        for (const auto& s : layer.scalers) {
            BasicScaler<U> su;
            su.lo = f(ParamGroup::Scaler, s.lo);
            su.hi = f(ParamGroup::Scaler, s.hi);
            L.scalers.push_back(su);
        }
        for (const auto& b : layer.bias) L.bias.push_back(f(ParamGroup::NodeBias, b));
        out.layers.push_back(std::move(L));
    }
    for (const auto& g : p.readout_gain) out.readout_gain.push_back(f(ParamGroup::ReadoutGain, g));
    for (const auto& o : p.readout_offset) out.readout_offset.push_back(f(ParamGroup::ReadoutOffset, o));
    return out;
}

/// Trainable scalars of the model as a flat ParamSet (canonical order, named slices).
ParamSet collect_params(const AkanModel& model);
/// Writes ParamSet values back; throws StructuralError on a size mismatch.
void assign_params(AkanModel& model, const ParamSet& params);
std::size_t trainable_parameter_count(const AkanModel& model);

/// Lifts the model onto `tape`: registered scalars become the given leaves, all others constants.
BasicParams<Var> lift_params(const AkanModel& model, Tape& tape, std::span<const Var> leaves);

// ---------------------------------------------------------------------------
// Forward evaluation

inline double clamp_counted(double x, const Interval& range, std::uint64_t& counter) {
    if (x < range.lo || x > range.hi) ++counter;
    return std::clamp(x, range.lo, range.hi);
}

inline Var clamp_counted(Var x, const Interval& range, std::uint64_t& counter) {
    const double v = x.value();
    if (v < range.lo || v > range.hi) ++counter;
    return x.tape()->clamp(x, range.lo, range.hi);
}

/// Voltage at `src` mapped through a scaler (two-point form keeps both endpoints exact).
template <class T>
T apply_scaler(const BasicScaler<T>& s, const T& sum, const Interval& voltage) {
    const T t = (sum - s.lo) / (s.hi - s.lo);
    return (1.0 - t) * voltage.lo + t * voltage.hi;
}

/// Identifies the RNPU being evaluated (for ordering checks and progress reports).
struct RnpuSite {
    std::size_t layer;
    std::size_t src;
    std::size_t dst;
    std::size_t rnpu;
};

/// Per-layer intermediate values, filled when requested.
template <class T>
struct ForwardTrace {
    std::vector<std::vector<T>> node_inputs;  // [layer][src] voltage fed to the layer's EPs
    std::vector<std::vector<T>> node_sums;    // [layer][dst] summed EP outputs (plus bias)
    std::vector<std::vector<std::optional<T>>> ep_outputs;  // [layer][src * n_out + dst]
};

/// k * (sum_r gain_r * I_r + skip_gain * v_in), with I_r the normalized device output.
/// `device` is called as device(site, electrodes) and must return the normalized current.
template <class T, class DeviceFn>
T edge_forward(const BasicEdge<T>& ep, const T& v_in, RnpuSite site, DeviceFn&& device) {
    std::optional<T> acc;
    for (std::size_t r = 0; r < ep.rnpus.size(); ++r) {
        const auto& rn = ep.rnpus[r];
        site.rnpu = r;
        auto electrodes = assemble_electrodes<T>(rn.input_electrode, std::span<const T>(rn.controls), v_in);
        T term = rn.gain * device(site, electrodes);
        acc = acc ? *acc + term : term;
    }
    if (ep.skip_gain) {
        T term = *ep.skip_gain * v_in;
        acc = acc ? *acc + term : term;
    }
    return ep.k * *acc;
}

/// Layer-by-layer evaluation: encode -> EPs -> node sums -> scaler -> ... -> readout.
/// Layer-0 inputs are supplied already encoded (as T). Devices are visited in
/// (layer, src, dst, rnpu) order.
template <class T, class DeviceFn>
std::vector<T> network_forward(const AkanModel& model, const BasicParams<T>& p, std::vector<T> inputs,
                               DeviceFn&& device, ClampStats& stats, ForwardTrace<T>* trace = nullptr) {
    const Interval voltage = model.voltage_range();
    if (trace) {
        trace->node_inputs.clear();
        trace->node_sums.clear();
        trace->ep_outputs.clear();
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        if (trace) {
            trace->node_inputs.push_back(inputs);
            trace->ep_outputs.emplace_back(layer.edges.size());
        }
        std::vector<std::optional<T>> sums(layer.n_out);
        for (std::size_t src = 0; src < layer.n_in; ++src) {
            for (std::size_t dst = 0; dst < layer.n_out; ++dst) {
                const auto& slot = layer.edge(src, dst);
                if (!slot) continue;
                T out = edge_forward(*slot, inputs[src], RnpuSite{l, src, dst, 0}, device);
                if (trace) trace->ep_outputs.back()[src * layer.n_out + dst] = out;
                sums[dst] = sums[dst] ? *sums[dst] + out : out;
            }
        }
        std::vector<T> node(layer.n_out);
        for (std::size_t dst = 0; dst < layer.n_out; ++dst) {
            node[dst] = sums[dst] ? *sums[dst] + layer.bias[dst] : layer.bias[dst];
        }
        if (trace) trace->node_sums.push_back(node);
        if (l + 1 == p.layers.size()) {
            std::vector<T> out;
            out.reserve(node.size());
            for (std::size_t o = 0; o < node.size(); ++o) out.push_back(p.readout_gain[o] * node[o] + p.readout_offset[o]);
            return out;
        }
        inputs.clear();
        for (std::size_t dst = 0; dst < layer.n_out; ++dst) {
            inputs.push_back(clamp_counted(apply_scaler(layer.scalers[dst], node[dst], voltage), voltage,
                                           stats.intermediate_clamps));
        }
    }
    return {};
}

/// Normalized current from the in-process device.
double device_normalized(const DeviceModel& device, std::span<const double, kElectrodes> v);
/// Fused tape node: one Custom node with the device's closed-form input gradient.
Var device_normalized(const DeviceModel& device, std::span<const Var, kElectrodes> v);

std::vector<double> encode_features(const AkanModel& model, std::span<const double> features, ClampStats* stats);

/// Single EP in isolation (uses the model device's normalization).
double ep_forward(const EdgeProcessor& ep, double v_in, const DeviceModel& device);

std::vector<double> akan_forward(const AkanModel& model, std::span<const double> features, ClampStats* stats = nullptr,
                                 ForwardTrace<double>* trace = nullptr);

enum class DeviceTaping { Fused, Primitive };

/// Taped forward using already lifted parameters.
std::vector<Var> akan_forward_taped(const AkanModel& model, const BasicParams<Var>& p, Tape& tape,
                                    std::span<const double> features, ClampStats* stats = nullptr,
                                    DeviceTaping taping = DeviceTaping::Fused);

/// Control voltages uniform in range, input electrodes uniform over 0..6, gains uniform in
/// [-1, 1], k = 1, skip gains 0 (if enabled), scalers at the voltage range, identity readout.
AkanModel random_init(const Topology& topology, std::shared_ptr<const DeviceModel> device, std::uint64_t seed);

/// Sets each hidden node's scaler source interval to the min/max of its node sum over the
/// batch (widened by model.scaler_margin), calibrating layers front to back.
void calibrate_scalers(AkanModel& model, std::span<const double> features, std::size_t n_features);

/// Features x row-major; returns one batch of predictions, n_outputs per sample.
std::vector<double> akan_forward_batch(const AkanModel& model, std::span<const double> features, ClampStats* stats = nullptr);

// Model checkpoint, schema version 1 (same line-token scheme as device checkpoints):
//   format akan-model / version 1 / topology [..]xd / scaler_margin / trainable <groups>
//   device file <path> | device inline <device body>
//   encoder <i> <x_min> <x_max>
//   layer <l> <n_in> <n_out>
//     edge <src> <dst> <k> <skip|none> <n_rnpus>, then per RNPU: rnpu <electrode> <gain> <c0..c5>
//     scaler <dst> <lo> <hi>; bias <dst> <value>
//   readout <o> <gain> <offset>
//   end
inline constexpr int kModelSchemaVersion = 1;

/// `device_ref` empty -> device embedded inline; otherwise written as a file reference.
void save_model(const AkanModel& model, std::ostream& out, const std::string& device_ref = {});
void save_model(const AkanModel& model, const std::filesystem::path& path, const std::string& device_ref = {});
/// Relative device references resolve against `base_dir`.
AkanModel load_model(std::istream& in, const std::filesystem::path& base_dir, const std::string& source_name = "<stream>");
AkanModel load_model(const std::filesystem::path& path);

}  // namespace akan

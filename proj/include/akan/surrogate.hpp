#pragma once
// Differentiable stand-ins for a physical RNPU: a map from 7 electrode voltages to
// one output current.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "akan/autodiff.hpp"
#include "akan/textio.hpp"

namespace akan {

inline constexpr std::size_t kElectrodes = 7;
inline constexpr std::size_t kControls = kElectrodes - 1;

using ElectrodeVector = std::array<double, kElectrodes>;

struct Interval {
    double lo = -1.0;
    double hi = 1.0;

    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    /// Two-point affine map sending lo -> target.lo and hi -> target.hi exactly.
    double map_to(const Interval& target, double x) const noexcept;
};

struct ElectrodeRanges {
    std::array<Interval, kElectrodes> voltage;  // volts
    Interval current{-1.0, 1.0};                // nA, metadata for normalization

    static ElectrodeRanges uniform(double v_min = -1.0, double v_max = 1.0);

    /// Throws StructuralError unless every interval has lo < hi.
    void validate() const;
    /// Interval valid on every electrode; used as the encoding target for any input slot.
    Interval common_voltage() const noexcept;
    /// Throws RangeError naming the first electrode whose voltage is outside its range.
    void check(std::span<const double> v) const;
};

enum class DeviceKind { Analytic, Mlp };
const char* to_string(DeviceKind kind);

/// Immutable after construction; safe to share across threads.
class DeviceModel {
public:
    virtual ~DeviceModel() = default;

    virtual DeviceKind kind() const noexcept = 0;
    const ElectrodeRanges& ranges() const noexcept { return ranges_; }

    /// Output current in nA. Throws StructuralError on wrong length and RangeError on
    /// out-of-range voltages.
    double forward(std::span<const double> v) const;

    /// Current and dI/dv_e for every electrode, same checks as forward.
    double forward_with_gradient(std::span<const double> v, std::span<double, kElectrodes> gradient) const;

    /// Records the model as tape primitives (affine, tanh/relu). Used to cross-check
    /// the closed-form gradient; no range check.
    Var record(Tape& tape, std::span<const Var, kElectrodes> v) const;

    /// Maps nA onto [-1, 1] through the current range.
    double normalize(double current) const noexcept;
    double normalization_slope() const noexcept { return 2.0 / ranges_.current.width(); }

protected:
    explicit DeviceModel(ElectrodeRanges ranges);
    void set_current_range(Interval current);

    virtual double eval(const double* v) const = 0;
    virtual double eval_with_gradient(const double* v, double* gradient) const = 0;
    virtual Var record_impl(Tape& tape, std::span<const Var, kElectrodes> v) const = 0;

    /// Sets the current range to the min/max of the output over `samples` uniform draws.
    void calibrate_current_range(std::uint64_t seed, std::size_t samples);

private:
    ElectrodeRanges ranges_;
};

/// I(v) = sum_j a_j tanh(sum_i W_ji v_i + b_j).
class AnalyticDevice final : public DeviceModel {
public:
    static constexpr std::size_t kDefaultUnits = 16;

    /// Seeded coefficients: W ~ U(-2.5, 2.5), b ~ U(-1, 1), a ~ U(-1, 1) nA; the current range is
    /// calibrated empirically from the same seed.
    static std::shared_ptr<const AnalyticDevice> generate(std::uint64_t seed, std::size_t units = kDefaultUnits,
                                                          ElectrodeRanges ranges = ElectrodeRanges::uniform());

    /// Explicit coefficients. W is row-major units x 7.
    AnalyticDevice(std::vector<double> a, std::vector<double> w, std::vector<double> b, ElectrodeRanges ranges);

    DeviceKind kind() const noexcept override { return DeviceKind::Analytic; }
    std::size_t units() const noexcept { return a_.size(); }
    std::span<const double> a() const noexcept { return a_; }
    std::span<const double> w() const noexcept { return w_; }
    std::span<const double> b() const noexcept { return b_; }

    /// Closed-form dI/dv, independent of any tape.
    ElectrodeVector analytic_gradient(std::span<const double> v) const;

private:
    double eval(const double* v) const override;
    double eval_with_gradient(const double* v, double* gradient) const override;
    Var record_impl(Tape& tape, std::span<const Var, kElectrodes> v) const override;

    std::vector<double> a_, w_, b_;
};

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // row-major outputs x inputs
    std::vector<double> bias;
};

/// Feed-forward ReLU surrogate, layer shape [7, 90, 90, 90, 90, 90, 1].
class MlpSurrogate final : public DeviceModel {
public:
    static constexpr std::array<std::size_t, 7> kShape{7, 90, 90, 90, 90, 90, 1};

    /// Uniform weights scaled by fan-in (He-uniform), zero-mean small biases.
    static std::shared_ptr<const MlpSurrogate> generate(std::uint64_t seed,
                                                        ElectrodeRanges ranges = ElectrodeRanges::uniform());

    /// Throws StructuralError naming the first layer whose dimensions differ from kShape,
    /// and NumericalError on any non-finite weight.
    MlpSurrogate(std::vector<DenseLayer> layers, ElectrodeRanges ranges);

    DeviceKind kind() const noexcept override { return DeviceKind::Mlp; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

private:
    double eval(const double* v) const override;
    double eval_with_gradient(const double* v, double* gradient) const override;
    Var record_impl(Tape& tape, std::span<const Var, kElectrodes> v) const override;

    std::vector<DenseLayer> layers_;
};

/// One RNPU inside an edge processor.
struct RnpuConfig {
    std::size_t input_electrode = 0;
    std::array<double, kControls> control_voltages{};
    double output_gain = 1.0;
};

/// Electrode index that control slot `control` drives when `input_electrode` carries the input.
std::size_t control_electrode(std::size_t input_electrode, std::size_t control) noexcept;

/// Input voltage at `input_electrode`, controls in ascending order on the remaining slots.
template <class T>
std::array<T, kElectrodes> assemble_electrodes(std::size_t input_electrode, std::span<const T> controls, T input) {
    std::array<T, kElectrodes> out{};
    for (std::size_t c = 0; c < kControls; ++c) out[control_electrode(input_electrode, c)] = controls[c];
    out[input_electrode] = input;
    return out;
}

/// Checked version: throws StructuralError when controls.size() != 6 or input_electrode > 6.
ElectrodeVector assemble_rnpu_input(std::size_t input_electrode, std::span<const double> controls, double input_voltage);
ElectrodeVector assemble_rnpu_input(const RnpuConfig& config, double input_voltage);

struct DisassembledInput {
    double input_voltage;
    std::array<double, kControls> controls;
};
DisassembledInput disassemble_rnpu_input(std::size_t input_electrode, const ElectrodeVector& v);

// Checkpoint format, schema version 1:
//   format akan-device
//   version 1
//   kind analytic|mlp
//   electrode <e> <v_min> <v_max>     (x7)
//   current <i_min> <i_max>
//   analytic: units <J>; matrix W <J> 7; vector b <J>; vector a <J>
//   mlp:      layers 6; per layer: matrix W<l> <out> <in>; vector b<l> <out>
//   end
// Numbers are written with 17 significant digits.
inline constexpr int kDeviceSchemaVersion = 1;

void save_device(const DeviceModel& model, std::ostream& out);
void save_device(const DeviceModel& model, const std::filesystem::path& path);
std::shared_ptr<const DeviceModel> load_device(std::istream& in, const std::string& source_name = "<stream>");
std::shared_ptr<const DeviceModel> load_device(const std::filesystem::path& path);

/// Reads from the "kind" line through "end" (the body shared with model checkpoints
/// that embed their device inline).
std::shared_ptr<const DeviceModel> read_device_body(textio::TokenReader& reader);
void write_device_body(const DeviceModel& model, std::ostream& out);

}  // namespace akan

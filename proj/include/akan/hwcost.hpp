#pragma once
// Energy, latency and area estimates for aKAN hardware and a per-operation cost model
// for a digital fixed-point MLP.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "akan/benchmarks.hpp"
#include "akan/network.hpp"

namespace akan {

/// SI units throughout. Conversion energies and DAC/ADC latencies are derived from the
/// (power, rate) pairs.
struct HardwareSpec {
    double dac_power = 1.46e-6;  // W at dac_rate
    double dac_rate = 2e6;       // conversions/s
    double adc_power = 2.6e-3;   // W at adc_rate
    double adc_rate = 100e6;     // samples/s
    double t_rnpu = 10e-9;       // s
    double p_tia = 94e-6;        // W
    double p_rnpu = 50e-9;       // W
    double a_rnpu = 1e-12;       // m^2
    double a_tia = 7000e-12;     // m^2
    double a_dac = 0.0;          // m^2, unknown
    double a_adc = 0.0;          // m^2, unknown

    double e_aconv() const noexcept { return dac_power / dac_rate; }
    double e_dconv() const noexcept { return adc_power / adc_rate; }
    double t_dac() const noexcept { return 1.0 / dac_rate; }
    double t_adc() const noexcept { return 1.0 / adc_rate; }

    /// Throws ArgumentError unless every entry is finite and > 0 (areas of DAC/ADC may be 0).
    void validate() const;
    /// One message per zero-valued area.
    std::vector<std::string> warnings() const;

    /// Keys are the field names; absent keys keep their defaults; unknown keys are an error.
    static HardwareSpec from_json(const std::string& text);
    static HardwareSpec load(const std::filesystem::path& path);
    std::string to_json() const;
};

struct NetworkCounts {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::size_t n_control = 0;
    std::size_t n_nodes = 0;
    std::size_t n_rnpu = 0;
    std::size_t n_layer = 0;
    std::size_t p = 1;  // samples
};

/// N_RNPU = d * #EPs, N_CONTROL = 6 N_RNPU, N_NODES = hidden widths + n_O.
NetworkCounts counts_from_topology(const Topology& topology, std::size_t samples = 1);
/// Counts only surviving EPs/RNPUs, and only nodes with at least one incoming EP.
NetworkCounts counts_from_model(const AkanModel& model, std::size_t samples = 1);

/// t_DAC + t_RNPU * N_LAYER + t_ADC.
double latency(const NetworkCounts& counts, const HardwareSpec& spec) noexcept;

enum class EnergyMode {
    /// TIA and RNPU power is drawn for every sample (terms scaled by P).
    PerSample,
    /// E_TIA = N_NODES P_TIA t_d and E_RNPU = N_RNPU P_RNPU t_d without a sample factor.
    Literal,
};

struct AreaBreakdown {
    double rnpu = 0.0;
    double tia = 0.0;
    double dac = 0.0;
    double adc = 0.0;
    double total = 0.0;
};

struct CostReport {
    NetworkCounts counts;
    double e_dac_input = 0.0;    // N_IN E_ACONV P
    double e_dac_control = 0.0;  // N_CONTROL E_ACONV
    double e_dac = 0.0;
    double e_adc = 0.0;
    double e_tia = 0.0;
    double e_rnpu = 0.0;
    double e_total = 0.0;  // e_adc + e_dac + e_tia + e_rnpu
    double t_d = 0.0;
    AreaBreakdown area;

    double per_inference() const noexcept { return e_total / static_cast<double>(counts.p); }
    /// Every term that scales with P: e_dac_input + e_adc + e_tia + e_rnpu.
    double sample_dependent() const noexcept { return e_dac_input + e_adc + e_tia + e_rnpu; }
};

/// Throws ArgumentError when P = 0.
CostReport energy(const NetworkCounts& counts, const HardwareSpec& spec, EnergyMode mode = EnergyMode::PerSample);
AreaBreakdown area(const NetworkCounts& counts, const HardwareSpec& spec) noexcept;

/// Digital MLP: one 4-lane SIMD MAC unit per neuron, tanh by look-up table.
struct DigitalSpec {
    double e_mac = 0.0;  // J per MAC
    double e_lut = 0.0;  // J per activation lookup
    double a_mac = 0.0;  // m^2 per MAC lane
    double a_lut = 0.0;  // m^2 per activation LUT
    double clock_hz = 500e6;
    std::size_t lanes = 4;

    /// Every constant is required; a missing key is an ArgumentError naming it.
    static DigitalSpec from_json(const std::string& text);
    static DigitalSpec load(const std::filesystem::path& path);
    void validate() const;
};

struct DigitalCostReport {
    std::size_t macs = 0;
    std::size_t activations = 0;
    std::size_t cycles = 0;
    std::size_t samples = 1;
    double energy_per_inference = 0.0;
    double energy_total = 0.0;
    double latency = 0.0;
    double area = 0.0;
};

/// MACs = sum w_l w_{l+1}; activations = sum of hidden widths; cycles = sum_l ceil(w_l / lanes)
/// plus one per activation layer; latency = cycles / clock.
DigitalCostReport mlp_cost(std::span<const std::size_t> widths, const DigitalSpec& spec, std::size_t samples = 1);

struct ParetoRow {
    std::string family;
    std::string network;
    double mse = 0.0;
    double energy = 0.0;  // for P samples
    double energy_per_inference = 0.0;
    double area = 0.0;
    double latency = 0.0;
};

/// Joins the cost models onto sweep results. Summary rows are used when present, run rows
/// otherwise. Throws StructuralError on a network string that does not parse.
std::vector<ParetoRow> pareto_sweep(const std::vector<SweepCsvRow>& results, const HardwareSpec& hw,
                                    const DigitalSpec& digital, std::size_t samples = 1000);

/// Largest ratio (cheapest MLP energy with MSE <= the aKAN's) / (aKAN energy) over aKAN rows; 0 if none match.
double max_energy_ratio_at_matched_mse(const std::vector<ParetoRow>& rows);

/// "family,network,mse,energy_j,energy_per_inference_j,area_m2,latency_s".
void write_pareto_csv(const std::vector<ParetoRow>& rows, std::ostream& out);
/// Single-row cost CSV with every term.
void write_cost_csv(const std::string& network, const CostReport& report, std::ostream& out);

}  // namespace akan

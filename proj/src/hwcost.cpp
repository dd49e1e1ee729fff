#include "akan/hwcost.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "akan/errors.hpp"
#include "akan/textio.hpp"

namespace akan {

namespace {

struct Field {
    const char* name;
    double HardwareSpec::*member;
    bool may_be_zero;
};

constexpr Field kHardwareFields[] = {
    {"dac_power", &HardwareSpec::dac_power, false}, {"dac_rate", &HardwareSpec::dac_rate, false},
    {"adc_power", &HardwareSpec::adc_power, false}, {"adc_rate", &HardwareSpec::adc_rate, false},
    {"t_rnpu", &HardwareSpec::t_rnpu, false},       {"p_tia", &HardwareSpec::p_tia, false},
    {"p_rnpu", &HardwareSpec::p_rnpu, false},       {"a_rnpu", &HardwareSpec::a_rnpu, false},
    {"a_tia", &HardwareSpec::a_tia, false},         {"a_dac", &HardwareSpec::a_dac, true},
    {"a_adc", &HardwareSpec::a_adc, true},
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ParseErrorKind::Syntax, std::string(what) + ": " + e.what());
    }
}

double json_number(const nlohmann::json& j, const std::string& key, const char* what) {
    if (!j.at(key).is_number()) throw ParseError(ParseErrorKind::Structural, std::string(what) + ": '" + key + "' must be a number");
    return j.at(key).get<double>();
}

}  // namespace

void HardwareSpec::validate() const {
    for (const auto& f : kHardwareFields) {
        const double v = this->*f.member;
        if (!std::isfinite(v) || v < 0.0 || (v == 0.0 && !f.may_be_zero)) {
            throw ArgumentError(std::string("hardware spec: ") + f.name + " must be finite and > 0");
        }
    }
}

std::vector<std::string> HardwareSpec::warnings() const {
    std::vector<std::string> w;
    if (a_dac == 0.0) w.emplace_back("DAC area unknown (a_dac = 0); area totals exclude DACs");
    if (a_adc == 0.0) w.emplace_back("ADC area unknown (a_adc = 0); area totals exclude ADCs");
    return w;
}

HardwareSpec HardwareSpec::from_json(const std::string& text) {
    auto j = parse_json(text, "hardware spec");
    if (!j.is_object()) throw ParseError(ParseErrorKind::Structural, "hardware spec must be a JSON object");
    HardwareSpec spec;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key().starts_with("_")) continue;  // comments
        bool known = false;
        for (const auto& f : kHardwareFields) {
            if (it.key() == f.name) {
                spec.*f.member = json_number(j, it.key(), "hardware spec");
                known = true;
            }
        }
        if (!known) throw ParseError(ParseErrorKind::Structural, "hardware spec: unknown key '" + it.key() + "'");
    }
    spec.validate();
    return spec;
}

HardwareSpec HardwareSpec::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

std::string HardwareSpec::to_json() const {
    nlohmann::ordered_json j;
    for (const auto& f : kHardwareFields) j[f.name] = this->*f.member;
    return j.dump(2);
}

NetworkCounts counts_from_topology(const Topology& topology, std::size_t samples) {
    topology.validate();
    NetworkCounts c;
    c.n_in = topology.inputs();
    c.n_out = topology.outputs();
    c.n_rnpu = topology.rnpus_per_ep * topology.ep_count();
    c.n_control = kControls * c.n_rnpu;
    for (std::size_t l = 1; l < topology.widths.size(); ++l) c.n_nodes += topology.widths[l];
    c.n_layer = topology.edge_layers();
    c.p = samples;
    return c;
}

NetworkCounts counts_from_model(const AkanModel& model, std::size_t samples) {
    model.validate();
    NetworkCounts c;
    c.n_in = model.topology.inputs();
    c.n_out = model.topology.outputs();
    c.n_rnpu = model.active_rnpu_count();
    c.n_control = kControls * c.n_rnpu;
    for (const auto& layer : model.params.layers) {
        for (std::size_t dst = 0; dst < layer.n_out; ++dst) {
            for (std::size_t src = 0; src < layer.n_in; ++src) {
                if (layer.edge(src, dst)) {
                    ++c.n_nodes;
                    break;
                }
            }
        }
    }
    c.n_layer = model.topology.edge_layers();
    c.p = samples;
    return c;
}

double latency(const NetworkCounts& counts, const HardwareSpec& spec) noexcept {
    return spec.t_dac() + spec.t_rnpu * static_cast<double>(counts.n_layer) + spec.t_adc();
}

AreaBreakdown area(const NetworkCounts& counts, const HardwareSpec& spec) noexcept {
    AreaBreakdown a;
    a.rnpu = static_cast<double>(counts.n_rnpu) * spec.a_rnpu;
    a.tia = static_cast<double>(counts.n_nodes) * spec.a_tia;
    a.dac = static_cast<double>(counts.n_in + counts.n_control) * spec.a_dac;
    a.adc = static_cast<double>(counts.n_out) * spec.a_adc;
    a.total = a.rnpu + a.tia + a.dac + a.adc;
    return a;
}

CostReport energy(const NetworkCounts& counts, const HardwareSpec& spec, EnergyMode mode) {
    if (counts.p == 0) throw ArgumentError("energy: need P >= 1 samples");
    spec.validate();
    const double p = static_cast<double>(counts.p);
    const double analog_p = mode == EnergyMode::PerSample ? p : 1.0;
    CostReport r;
    r.counts = counts;
    r.t_d = latency(counts, spec);
    r.e_dac_input = static_cast<double>(counts.n_in) * spec.e_aconv() * p;
    r.e_dac_control = static_cast<double>(counts.n_control) * spec.e_aconv();
    r.e_dac = r.e_dac_input + r.e_dac_control;
    r.e_adc = static_cast<double>(counts.n_out) * spec.e_dconv() * p;
    r.e_tia = static_cast<double>(counts.n_nodes) * spec.p_tia * r.t_d * analog_p;
    r.e_rnpu = static_cast<double>(counts.n_rnpu) * spec.p_rnpu * r.t_d * analog_p;
    r.e_total = r.e_adc + r.e_dac + r.e_tia + r.e_rnpu;
    r.area = area(counts, spec);
    return r;
}

void DigitalSpec::validate() const {
    const std::pair<const char*, double> fields[] = {
        {"e_mac", e_mac}, {"e_lut", e_lut}, {"a_mac", a_mac}, {"a_lut", a_lut}, {"clock_hz", clock_hz}};
    for (const auto& [name, v] : fields) {
        if (!std::isfinite(v) || v <= 0.0) throw ArgumentError(std::string("digital spec: ") + name + " must be finite and > 0");
    }
    if (lanes == 0) throw ArgumentError("digital spec: lanes must be >= 1");
}

DigitalSpec DigitalSpec::from_json(const std::string& text) {
    auto j = parse_json(text, "digital spec");
    if (!j.is_object()) throw ParseError(ParseErrorKind::Structural, "digital spec must be a JSON object");
    DigitalSpec s;
    for (const char* key : {"e_mac", "e_lut", "a_mac", "a_lut", "clock_hz", "lanes"}) {
        if (!j.contains(key)) throw ArgumentError(std::string("digital spec: missing constant '") + key + "'");
    }
    s.e_mac = json_number(j, "e_mac", "digital spec");
    s.e_lut = json_number(j, "e_lut", "digital spec");
    s.a_mac = json_number(j, "a_mac", "digital spec");
    s.a_lut = json_number(j, "a_lut", "digital spec");
    s.clock_hz = json_number(j, "clock_hz", "digital spec");
    if (!j.at("lanes").is_number_unsigned()) throw ParseError(ParseErrorKind::Structural, "digital spec: lanes must be a positive integer");
    s.lanes = j.at("lanes").get<std::size_t>();
    s.validate();
    return s;
}

DigitalSpec DigitalSpec::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

DigitalCostReport mlp_cost(std::span<const std::size_t> widths, const DigitalSpec& spec, std::size_t samples) {
    spec.validate();
    if (widths.size() < 2) throw StructuralError("MLP needs at least input and output widths");
    if (samples == 0) throw ArgumentError("mlp_cost: need P >= 1 samples");
    DigitalCostReport r;
    r.samples = samples;
    std::size_t neurons = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        r.macs += widths[l] * widths[l + 1];
        r.cycles += (widths[l] + spec.lanes - 1) / spec.lanes;
        neurons += widths[l + 1];
    }
    for (std::size_t l = 1; l + 1 < widths.size(); ++l) r.activations += widths[l];
    r.cycles += widths.size() - 2;  // one per activation layer
    r.energy_per_inference = static_cast<double>(r.macs) * spec.e_mac + static_cast<double>(r.activations) * spec.e_lut;
    r.energy_total = r.energy_per_inference * static_cast<double>(samples);
    r.latency = static_cast<double>(r.cycles) / spec.clock_hz;
    r.area = static_cast<double>(neurons * spec.lanes) * spec.a_mac + static_cast<double>(r.activations) * spec.a_lut;
    return r;
}

std::vector<ParetoRow> pareto_sweep(const std::vector<SweepCsvRow>& results, const HardwareSpec& hw,
                                    const DigitalSpec& digital, std::size_t samples) {
    bool has_summary = false;
    for (const auto& r : results) has_summary = has_summary || r.row == "summary";
    std::vector<ParetoRow> out;
    for (const auto& r : results) {
        if (has_summary && r.row != "summary") continue;
        ParetoRow p;
        p.family = r.family;
        p.network = r.network;
        p.mse = r.mse;
        if (r.family == "akan") {
            const Topology t = Topology::parse(r.network);
            const CostReport c = energy(counts_from_topology(t, samples), hw);
            p.energy = c.e_total;
            p.energy_per_inference = c.per_inference();
            p.area = c.area.total;
            p.latency = c.t_d;
        } else if (r.family.starts_with("mlp")) {
            const auto widths = parse_widths(r.network);
            const DigitalCostReport c = mlp_cost(widths, digital, samples);
            p.energy = c.energy_total;
            p.energy_per_inference = c.energy_per_inference;
            p.area = c.area;
            p.latency = c.latency;
        } else {
            throw StructuralError("unknown network family '" + r.family + "'");
        }
        out.push_back(std::move(p));
    }
    return out;
}

double max_energy_ratio_at_matched_mse(const std::vector<ParetoRow>& rows) {
    double best = 0.0;
    for (const auto& a : rows) {
        if (a.family != "akan") continue;
        double cheapest = 0.0;
        bool found = false;
        for (const auto& m : rows) {
            if (!m.family.starts_with("mlp") || m.mse > a.mse) continue;
            if (!found || m.energy < cheapest) cheapest = m.energy;
            found = true;
        }
        if (found) best = std::max(best, cheapest / a.energy);
    }
    return best;
}

void write_pareto_csv(const std::vector<ParetoRow>& rows, std::ostream& out) {
    using textio::format_double;
    out << "family,network,mse,energy_j,energy_per_inference_j,area_m2,latency_s\n";
    for (const auto& r : rows) {
        out << r.family << ",\"" << r.network << "\"," << format_double(r.mse) << ',' << format_double(r.energy) << ','
            << format_double(r.energy_per_inference) << ',' << format_double(r.area) << ',' << format_double(r.latency)
            << '\n';
    }
}

void write_cost_csv(const std::string& network, const CostReport& r, std::ostream& out) {
    using textio::format_double;
    out << "network,P,n_in,n_out,n_control,n_nodes,n_rnpu,n_layer,t_d_s,e_dac_j,e_adc_j,e_tia_j,e_rnpu_j,e_total_j,"
           "e_per_inference_j,area_rnpu_m2,area_tia_m2,area_dac_m2,area_adc_m2,area_total_m2\n";
    const auto& c = r.counts;
    out << '"' << network << "\"," << c.p << ',' << c.n_in << ',' << c.n_out << ',' << c.n_control << ',' << c.n_nodes
        << ',' << c.n_rnpu << ',' << c.n_layer << ',' << format_double(r.t_d) << ',' << format_double(r.e_dac) << ','
        << format_double(r.e_adc) << ',' << format_double(r.e_tia) << ',' << format_double(r.e_rnpu) << ','
        << format_double(r.e_total) << ',' << format_double(r.per_inference()) << ',' << format_double(r.area.rnpu)
        << ',' << format_double(r.area.tia) << ',' << format_double(r.area.dac) << ',' << format_double(r.area.adc)
        << ',' << format_double(r.area.total) << '\n';
}

}  // namespace akan

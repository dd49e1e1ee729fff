#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "akan/hwcost.hpp"
#include "doctest.h"

using namespace akan;

namespace {

std::map<std::string, double> golden(const std::string& file) {
    std::ifstream in(std::string(AKAN_GOLDEN_DIR) + "/" + file);
    REQUIRE(in);
    std::map<std::string, double> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key, frac;
        double value = 0.0;
        ls >> key >> frac >> value;
        out[key] = value;
    }
    return out;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("counts from topology") {
    auto c = counts_from_topology(Topology::parse("[2,1,1]x3"));
    CHECK(c.n_rnpu == 9);
    CHECK(c.n_control == 54);
    CHECK(c.n_nodes == 2);
    CHECK(c.n_layer == 2);
    CHECK(c.n_in == 2);
    CHECK(c.n_out == 1);
    auto a = counts_from_topology(Topology::parse("[1,1]x5"));
    CHECK(a.n_rnpu == 5);
    CHECK(a.n_nodes == 1);
    CHECK(a.n_layer == 1);
    auto b = counts_from_topology(Topology::parse("[2,3,1]x4"));
    CHECK(Topology::parse("[2,3,1]x4").ep_count() == 9);
    CHECK(b.n_rnpu == 36);
    CHECK(b.n_nodes == 4);
    CHECK(b.n_layer == 2);
}

TEST_CASE("counts from a pruned model skip removed EPs and silent nodes") {
    auto m = random_init(Topology::parse("[2,2,1]x2"), AnalyticDevice::generate(0), 0);
    m.params.layers[0].edge(0, 1).reset();
    m.params.layers[0].edge(1, 1).reset();
    m.params.layers[1].edge(1, 0).reset();
    auto c = counts_from_model(m);
    CHECK(c.n_rnpu == 6);
    CHECK(c.n_nodes == 2);
    CHECK(c.n_layer == 2);
}

TEST_CASE("latency") {
    HardwareSpec hw;
    NetworkCounts c;
    c.n_layer = 2;
    CHECK(latency(c, hw) == doctest::Approx(530e-9).epsilon(1e-15));
    c.n_layer = 0;
    CHECK(latency(c, hw) == hw.t_dac() + hw.t_adc());
    c.n_layer = 9;
    CHECK(latency(c, hw) == doctest::Approx(600e-9).epsilon(1e-15));
    CHECK(hw.t_dac() == doctest::Approx(500e-9).epsilon(1e-15));
    CHECK(hw.t_adc() == doctest::Approx(10e-9).epsilon(1e-15));
}

TEST_CASE("energy") {
    HardwareSpec hw;
    NetworkCounts zero;
    CHECK(energy(zero, hw).e_total == 0.0);
    zero.p = 0;
    CHECK_THROWS_AS(energy(zero, hw), ArgumentError);

    // terms written out with the default constants for [2,1,1]x3 at P = 1
    auto c = counts_from_topology(Topology::parse("[2,1,1]x3"), 1);
    auto r = energy(c, hw);
    const double t_d = 530e-9;
    CHECK(r.t_d == doctest::Approx(t_d).epsilon(1e-15));
    CHECK(r.e_dac_input == doctest::Approx(2 * 0.73e-12).epsilon(1e-14));
    CHECK(r.e_dac_control == doctest::Approx(54 * 0.73e-12).epsilon(1e-14));
    CHECK(r.e_adc == doctest::Approx(26e-12).epsilon(1e-14));
    CHECK(r.e_tia == doctest::Approx(2 * 94e-6 * t_d).epsilon(1e-14));
    CHECK(r.e_rnpu == doctest::Approx(9 * 50e-9 * t_d).epsilon(1e-14));
    // the sample-dependent part, about 127 pJ
    CHECK(r.sample_dependent() == doctest::Approx(127.3e-12).epsilon(1e-3));
    CHECK(r.e_total == doctest::Approx(r.e_adc + r.e_dac + r.e_tia + r.e_rnpu).epsilon(1e-15));
    CHECK(r.e_dac == doctest::Approx(r.e_dac_input + r.e_dac_control).epsilon(1e-15));
}

TEST_CASE("energy is linear in P apart from the one-off control DAC term") {
    HardwareSpec hw;
    auto c1 = counts_from_topology(Topology::parse("[2,3,1]x4"), 250);
    auto c2 = c1;
    c2.p = 500;
    auto r1 = energy(c1, hw), r2 = energy(c2, hw);
    CHECK(r2.e_dac_control == r1.e_dac_control);
    CHECK(rel(r2.e_total - r2.e_dac_control, 2 * (r1.e_total - r1.e_dac_control)) < 1e-14);
    CHECK(rel(r1.per_inference() * 250, r1.e_total) < 1e-15);
}

TEST_CASE("literal mode keeps TIA and RNPU terms per batch") {
    HardwareSpec hw;
    auto c = counts_from_topology(Topology::parse("[2,1,1]x3"), 1000);
    auto per = energy(c, hw, EnergyMode::PerSample);
    auto lit = energy(c, hw, EnergyMode::Literal);
    CHECK(rel(per.e_tia, 1000 * lit.e_tia) < 1e-14);
    CHECK(rel(per.e_rnpu, 1000 * lit.e_rnpu) < 1e-14);
    CHECK(per.e_adc == lit.e_adc);
    CHECK(per.e_dac == lit.e_dac);
}

TEST_CASE("energy matches the exact-fraction golden file") {
    auto g = golden("energy_2-1-1x3_P1000.txt");
    auto r = energy(counts_from_topology(Topology::parse("[2,1,1]x3"), 1000), HardwareSpec{});
    CHECK(rel(r.t_d, g.at("t_d")) < 1e-12);
    CHECK(rel(r.e_dac_input, g.at("e_dac_input")) < 1e-12);
    CHECK(rel(r.e_dac_control, g.at("e_dac_control")) < 1e-12);
    CHECK(rel(r.e_adc, g.at("e_adc")) < 1e-12);
    CHECK(rel(r.e_tia, g.at("e_tia")) < 1e-12);
    CHECK(rel(r.e_rnpu, g.at("e_rnpu")) < 1e-12);
    CHECK(rel(r.e_total, g.at("e_total")) < 1e-12);
}

TEST_CASE("area") {
    HardwareSpec hw;
    auto a = area(counts_from_topology(Topology::parse("[2,1,1]x3")), hw);
    CHECK(a.tia == doctest::Approx(14000e-12).epsilon(1e-14));
    CHECK(a.rnpu == doctest::Approx(9e-12).epsilon(1e-14));
    CHECK(a.dac == 0.0);
    CHECK(a.total == doctest::Approx(a.tia + a.rnpu).epsilon(1e-15));
    CHECK(area(NetworkCounts{}, hw).total == 0.0);
    CHECK(hw.warnings().size() == 2);

    HardwareSpec with_dac = hw;
    with_dac.a_dac = 1e-9;
    with_dac.a_adc = 2e-9;
    auto c = counts_from_topology(Topology::parse("[2,1,1]x3"));
    auto b = area(c, with_dac);
    CHECK(b.dac == doctest::Approx(56e-9));
    CHECK(b.adc == doctest::Approx(2e-9));
    CHECK(with_dac.warnings().empty());
}

TEST_CASE("TIA to RNPU area ratio over the aKAN sweep grids") {
    // ratio = N_NODES * 7000 / N_RNPU; smallest for a single node fed by 50 RNPUs
    HardwareSpec hw;
    double smallest = 1e300;
    for (const auto* name : {"tables1-fig2d", "tables1-fig2e", "tables1-fig2f"}) {
        for (const auto& cell : named_grid(name).cells) {
            auto c = counts_from_topology(Topology{cell.widths, cell.rnpus_per_ep, false});
            auto a = area(c, hw);
            CHECK(a.tia / a.rnpu ==
                  doctest::Approx(7000.0 * static_cast<double>(c.n_nodes) / static_cast<double>(c.n_rnpu)));
            smallest = std::min(smallest, a.tia / a.rnpu);
        }
    }
    CHECK(smallest == doctest::Approx(140.0));
}

TEST_CASE("hardware spec JSON") {
    auto hw = HardwareSpec::from_json(R"({"_units": "SI", "t_rnpu": 20e-9})");
    CHECK(hw.t_rnpu == 20e-9);
    CHECK(hw.p_tia == 94e-6);
    CHECK_THROWS_AS(HardwareSpec::from_json(R"({"t_rnpux": 1})"), ParseError);
    CHECK_THROWS_AS(HardwareSpec::from_json(R"({"t_rnpu": -1})"), ArgumentError);
    CHECK_THROWS_AS(HardwareSpec::from_json(R"({"t_rnpu": "fast"})"), ParseError);
    auto back = HardwareSpec::from_json(hw.to_json());
    CHECK(back.t_rnpu == hw.t_rnpu);
    CHECK(back.adc_power == hw.adc_power);

    auto shipped = HardwareSpec::load(std::string(AKAN_SOURCE_DIR) + "/configs/hardware.json");
    CHECK(shipped.dac_power == HardwareSpec{}.dac_power);
    CHECK(shipped.a_tia == HardwareSpec{}.a_tia);
}

TEST_CASE("digital MLP cost") {
    auto spec = DigitalSpec::load(std::string(AKAN_SOURCE_DIR) + "/configs/digital.json");
    auto r = mlp_cost(std::vector<std::size_t>{2, 5, 1}, spec);
    CHECK(r.macs == 15);
    CHECK(r.activations == 5);
    // ceil(2/4) + ceil(5/4) + one activation layer
    CHECK(r.cycles == 1 + 2 + 1);
    CHECK(r.energy_per_inference == doctest::Approx(15 * spec.e_mac + 5 * spec.e_lut));

    auto flat = mlp_cost(std::vector<std::size_t>{3, 2}, spec);
    CHECK(flat.macs == 6);
    CHECK(flat.activations == 0);

    auto mid = mlp_cost(std::vector<std::size_t>{2, 200, 1}, spec, 1000);
    CHECK(mid.cycles == 52);
    CHECK(mid.latency == doctest::Approx(104e-9));
    CHECK(mid.energy_total == doctest::Approx(1000 * mid.energy_per_inference));

    CHECK_THROWS_AS(DigitalSpec::from_json(R"({"e_mac": 1e-12, "e_lut": 1e-12, "a_mac": 1e-9, "clock_hz": 5e8, "lanes": 4})"),
                    ArgumentError);
    try {
        DigitalSpec::from_json(R"({"e_mac": 1e-12, "e_lut": 1e-12, "a_mac": 1e-9, "clock_hz": 5e8, "lanes": 4})");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("a_lut") != std::string::npos);
    }
}

TEST_CASE("pareto join") {
    auto spec = DigitalSpec::load(std::string(AKAN_SOURCE_DIR) + "/configs/digital.json");
    std::vector<SweepCsvRow> one{{"akan", "[2,1,1]x3", 3, 66, "0", "run", 0.01}};
    auto rows = pareto_sweep(one, HardwareSpec{}, spec, 1000);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].energy == doctest::Approx(energy(counts_from_topology(Topology::parse("[2,1,1]x3"), 1000), HardwareSpec{}).e_total));
    CHECK(rows[0].latency == doctest::Approx(530e-9));

    std::vector<SweepCsvRow> mixed{{"akan", "[2,1,1]x3", 3, 66, "0", "run", 0.02},
                                   {"akan", "[2,1,1]x3", 3, 66, "", "summary", 0.01},
                                   {"mlp_tanh", "[2,200,1]", 0, 801, "", "summary", 0.005},
                                   {"mlp_tanh", "[2,5,1]", 0, 21, "", "summary", 0.5}};
    rows = pareto_sweep(mixed, HardwareSpec{}, spec, 1000);
    REQUIRE(rows.size() == 3);
    const double ratio = max_energy_ratio_at_matched_mse(rows);
    CHECK(ratio == doctest::Approx(rows[1].energy / rows[0].energy));

    std::vector<SweepCsvRow> bad{{"akan", "[2,1", 1, 1, "", "summary", 0.1}};
    CHECK_THROWS_AS(pareto_sweep(bad, HardwareSpec{}, spec), StructuralError);

    std::ostringstream out;
    write_pareto_csv(rows, out);
    CHECK(out.str().starts_with("family,network,mse,energy_j,energy_per_inference_j,area_m2,latency_s\n"));
}

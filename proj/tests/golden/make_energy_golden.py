"""Exact-rational energy/latency values for [2,1,1]x3 at P = 1000 with the default hardware constants."""
from fractions import Fraction as F

dac_power, dac_rate = F("1.46e-6"), F("2e6")
adc_power, adc_rate = F("2.6e-3"), F("100e6")
t_rnpu, p_tia, p_rnpu = F("10e-9"), F("94e-6"), F("50e-9")

# [2,1,1]x3: 3 EPs of 3 RNPUs, 6 controls each, one hidden node plus one output node
n_in, n_out, n_rnpu, n_nodes, n_layer, P = 2, 1, 9, 2, 2, 1000
n_control = 6 * n_rnpu

e_aconv = dac_power / dac_rate
e_dconv = adc_power / adc_rate
t_d = 1 / dac_rate + t_rnpu * n_layer + 1 / adc_rate

terms = {
    "t_d": t_d,
    "e_dac_input": n_in * e_aconv * P,
    "e_dac_control": n_control * e_aconv,
    "e_adc": n_out * e_dconv * P,
    "e_tia": n_nodes * p_tia * t_d * P,
    "e_rnpu": n_rnpu * p_rnpu * t_d * P,
}
terms["e_total"] = sum(v for k, v in terms.items() if k.startswith("e_"))

with open("energy_2-1-1x3_P1000.txt", "w") as out:
    out.write("# [2,1,1]x3, P = 1000, default hardware constants; exact fractions, SI units\n")
    for k, v in terms.items():
        out.write(f"{k} {v.numerator}/{v.denominator} {float(v)!r}\n")

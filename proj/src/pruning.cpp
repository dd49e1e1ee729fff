#include "akan/pruning.hpp"

#include <cmath>
#include <ostream>

#include "akan/errors.hpp"
#include "akan/textio.hpp"

namespace akan {

void PruneConfig::validate() const {
    if (!(tau_act > 0.0) || !(tau_out > 0.0)) throw ArgumentError("pruning thresholds must be > 0");
    finetune.validate();
}

const char* to_string(PruneRule rule) {
    switch (rule) {
        case PruneRule::Activation: return "activation";
        case PruneRule::Contribution: return "contribution";
        case PruneRule::DanglingInput: return "dangling_input";
        case PruneRule::DanglingOutput: return "dangling_output";
    }
    return "?";
}

AkanModel absorb_gains(AkanModel model) {
    for (auto& layer : model.params.layers) {
        for (auto& slot : layer.edges) {
            if (!slot) continue;
            for (auto& r : slot->rnpus) r.gain *= slot->k;
            if (slot->skip_gain) *slot->skip_gain *= slot->k;
            slot->k = 1.0;
        }
    }
    return model;
}

double dataset_mse(const AkanModel& model, const Dataset& data) {
    return mse_loss(akan_forward_batch(model, data.features), data.targets);
}

namespace {

struct Welford {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double variance() const { return n ? m2 / static_cast<double>(n) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
};

bool any_path(const AkanModel& m) {
    std::vector<bool> live(m.topology.inputs(), true);
    for (const auto& layer : m.params.layers) {
        std::vector<bool> next(layer.n_out, false);
        for (std::size_t src = 0; src < layer.n_in; ++src) {
            if (!live[src]) continue;
            for (std::size_t dst = 0; dst < layer.n_out; ++dst) {
                if (layer.edge(src, dst)) next[dst] = true;
            }
        }
        live = std::move(next);
    }
    for (bool b : live) {
        if (b) return true;
    }
    return false;
}

}  // namespace

PruneResult prune(const AkanModel& model, const Dataset& data, const PruneConfig& config) {
    config.validate();
    model.validate();
    data.validate();
    if (data.n_features != model.topology.inputs()) throw StructuralError("dataset width does not match the model inputs");

    PruneResult out;
    out.model = model;
    out.eps_before = model.active_ep_count();
    out.params_before = trainable_parameter_count(model);

    const auto& P = model.params;
    const std::size_t L = P.layers.size();
    const Interval voltage = model.voltage_range();
    std::vector<std::vector<Welford>> act(L), ep(L), node(L);
    for (std::size_t l = 0; l < L; ++l) {
        act[l].resize(P.layers[l].n_in);
        ep[l].resize(P.layers[l].edges.size());
        node[l].resize(P.layers[l].n_out);
    }
    ForwardTrace<double> trace;
    for (std::size_t i = 0; i < data.size(); ++i) {
        akan_forward(model, data.row(i), nullptr, &trace);
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t s = 0; s < act[l].size(); ++s) {
                act[l][s].add(2.0 * (trace.node_inputs[l][s] - voltage.lo) / voltage.width() - 1.0);
            }
            for (std::size_t e = 0; e < ep[l].size(); ++e) {
                if (trace.ep_outputs[l][e]) ep[l][e].add(*trace.ep_outputs[l][e]);
            }
            for (std::size_t d = 0; d < node[l].size(); ++d) node[l][d].add(trace.node_sums[l][d]);
        }
    }

    auto& layers = out.model.params.layers;
    for (std::size_t l = 0; l < L; ++l) {
        auto& layer = layers[l];
        double var_sum = 0.0;
        for (const auto& w : node[l]) var_sum += w.variance();
        const double layer_std = std::sqrt(var_sum / static_cast<double>(node[l].size()));
        const double contribution_threshold = config.tau_out * layer_std;
        for (std::size_t src = 0; src < layer.n_in; ++src) {
            for (std::size_t dst = 0; dst < layer.n_out; ++dst) {
                const std::size_t e = src * layer.n_out + dst;
                if (!layer.edges[e]) continue;
                RemovalRecord rec{l, src, dst, PruneRule::Activation, act[l][src].stddev(), config.tau_act};
                if (!(rec.statistic < config.tau_act)) {
                    rec.rule = PruneRule::Contribution;
                    rec.statistic = ep[l][e].stddev();
                    rec.threshold = contribution_threshold;
                    if (!(rec.statistic == 0.0 || rec.statistic < contribution_threshold)) continue;
                }
                // the near-constant part of a removed EP stays in the network as bias
                layer.bias[dst] += ep[l][e].mean;
                layer.edges[e].reset();
                out.log.push_back(rec);
            }
        }
    }

    // Dangling hidden nodes, repeated until stable.
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t h = 1; h < L; ++h) {
            auto& before = layers[h - 1];
            auto& after = layers[h];
            for (std::size_t j = 0; j < after.n_in; ++j) {
                bool incoming = false, outgoing = false;
                for (std::size_t s = 0; s < before.n_in; ++s) incoming = incoming || before.edge(s, j).has_value();
                for (std::size_t d = 0; d < after.n_out; ++d) outgoing = outgoing || after.edge(j, d).has_value();
                if (!incoming && outgoing) {
                    ClampStats ignored;
                    const double v = clamp_counted(apply_scaler(before.scalers[j], before.bias[j], voltage), voltage,
                                                   ignored.intermediate_clamps);
                    for (std::size_t d = 0; d < after.n_out; ++d) {
                        auto& slot = after.edge(j, d);
                        if (!slot) continue;
                        const double c = ep_forward(*slot, v, *out.model.device);
                        after.bias[d] += c;
                        slot.reset();
                        out.log.push_back({h, j, d, PruneRule::DanglingInput, c, 0.0});
                        changed = true;
                    }
                } else if (incoming && !outgoing) {
                    for (std::size_t s = 0; s < before.n_in; ++s) {
                        auto& slot = before.edge(s, j);
                        if (!slot) continue;
                        slot.reset();
                        out.log.push_back({h - 1, s, j, PruneRule::DanglingOutput, 0.0, 0.0});
                        changed = true;
                    }
                }
            }
        }
    }

    if (!any_path(out.model)) {
        throw PruneError("pruning would disconnect every input from the output (" + std::to_string(out.log.size()) +
                         " of " + std::to_string(out.eps_before) + " EPs flagged); lower tau_act/tau_out");
    }
    out.eps_after = out.model.active_ep_count();
    out.params_after = trainable_parameter_count(out.model);
    return out;
}

PipelineReport prune_and_finetune(const AkanModel& regularized, const Dataset& data, const PruneConfig& config,
                                  std::optional<double> mse_unregularized) {
    config.validate();
    PipelineReport rep;
    rep.mse_unregularized = mse_unregularized;
    rep.mse_regularized = dataset_mse(regularized, data);
    rep.pruned = prune(absorb_gains(regularized), data, config);
    rep.mse_pruned = dataset_mse(rep.pruned.model, data);

    AkanModel m = rep.pruned.model;
    m.trainable.pruning_gain = false;
    TrainConfig tc = config.finetune;
    tc.l1 = 0.0;
    rep.finetuned = train(std::move(m), data, tc);
    rep.mse_finetuned = rep.finetuned.report.best_mse;
    return rep;
}

void write_removal_csv(const std::vector<RemovalRecord>& log, std::ostream& out) {
    using textio::format_double;
    out << "layer,src,dst,rule,statistic,threshold\n";
    for (const auto& r : log) {
        out << r.layer << ',' << r.src << ',' << r.dst << ',' << to_string(r.rule) << ',' << format_double(r.statistic)
            << ',' << format_double(r.threshold) << '\n';
    }
}

}  // namespace akan

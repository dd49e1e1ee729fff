#pragma once
// Structural pruning of edge processors: gain absorption, statistic-based removal,
// dangling-node cleanup and fine-tuning of the survivors.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "akan/network.hpp"
#include "akan/training.hpp"

namespace akan {

struct PruneConfig {
    /// Minimum std of the EP's normalized input voltage over the dataset.
    double tau_act = 1e-3;
    /// Minimum EP output std as a fraction of the RMS node-sum std of its layer.
    double tau_out = 1e-2;
    /// Regression defaults with a tenfold smaller step: the absorbed gains are small, and a
    /// full-size first Adam step throws the pruned model far from its starting point.
    TrainConfig finetune = [] {
        TrainConfig t = TrainConfig::regression();
        t.learning_rate = 1e-3;
        return t;
    }();

    /// Throws ArgumentError unless both thresholds are > 0.
    void validate() const;
};

enum class PruneRule { Activation, Contribution, DanglingInput, DanglingOutput };
const char* to_string(PruneRule rule);

struct RemovalRecord {
    std::size_t layer = 0;
    std::size_t src = 0;
    std::size_t dst = 0;
    PruneRule rule = PruneRule::Contribution;
    double statistic = 0.0;
    double threshold = 0.0;
};

/// Multiplies each EP's k into its RNPU gains and skip gain and resets k to 1.
AkanModel absorb_gains(AkanModel model);

struct PruneResult {
    AkanModel model;
    std::vector<RemovalRecord> log;
    std::size_t eps_before = 0;
    std::size_t eps_after = 0;
    std::size_t params_before = 0;
    std::size_t params_after = 0;
};

/// Removes EPs with input std < tau_act or output std < tau_out * layer std (an output
/// that is identically zero always counts as weak), then removes dangling hidden nodes
/// transitively. A hidden node without incoming EPs is constant, so its outgoing EP
/// outputs are folded into the downstream node biases. Throws PruneError if no path
/// from an input to an output would remain.
PruneResult prune(const AkanModel& model, const Dataset& data, const PruneConfig& config);

struct PipelineReport {
    std::optional<double> mse_unregularized;
    double mse_regularized = 0.0;
    double mse_pruned = 0.0;
    double mse_finetuned = 0.0;
    PruneResult pruned;
    TrainResult finetuned;
};

/// absorb_gains -> prune -> train with l1 = 0. Scalers are kept so fine-tuning starts from the pruned function.
PipelineReport prune_and_finetune(const AkanModel& regularized, const Dataset& data, const PruneConfig& config,
                                  std::optional<double> mse_unregularized = std::nullopt);

/// Data MSE of the model on the dataset.
double dataset_mse(const AkanModel& model, const Dataset& data);

/// "layer,src,dst,rule,statistic,threshold".
void write_removal_csv(const std::vector<RemovalRecord>& log, std::ostream& out);

}  // namespace akan

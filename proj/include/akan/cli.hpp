#pragma once
// Command-line front end: experiment configs, run orchestration, manifests and
// plot-ready CSVs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "akan/benchmarks.hpp"
#include "akan/hwcost.hpp"
#include "akan/network.hpp"
#include "akan/pruning.hpp"
#include "akan/training.hpp"

namespace akan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kOutputDirEnv = "AKAN_OUTPUT_DIR";
inline constexpr const char* kEndpointEnv = "AKAN_DEVICE_ENDPOINT";

/// Bad flags, missing files and invalid configs. Maps to exit status 2.
class UsageError : public Error {
public:
    using Error::Error;
};

struct TaskSpec {
    TaskKind kind = TaskKind::Regression;
    /// sine | bessel | exp2 | exp4 | moons | spirals | tabular
    std::string name = "sine";
    std::size_t samples = 1000;
    std::uint64_t data_seed = 0;
    double noise = 0.05;
    double turns = 1.0;
    double train_fraction = 0.8;
    std::filesystem::path schema;  // tabular only
    std::filesystem::path data;
};

struct DeviceSpec {
    /// analytic | mlp | file
    std::string kind = "analytic";
    std::uint64_t seed = 0;
    std::filesystem::path file;

    std::shared_ptr<const DeviceModel> build() const;
};

struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 0;
    TaskSpec task;
    DeviceSpec device;
    Topology topology;
    TrainConfig train;
    std::optional<PruneConfig> prune;
    /// Also train an unregularized reference before pruning.
    bool prune_baseline = false;
    std::optional<std::filesystem::path> hardware;
    std::filesystem::path output_dir;

    /// Fully resolved settings as sorted JSON; hashed into the manifest.
    std::string canonical;
};

/// Relative paths resolve against the config file's directory. Unknown keys, a missing
/// seed and missing referenced files are UsageErrors.
ExperimentConfig parse_experiment(const std::string& text, const std::filesystem::path& base_dir,
                                  const std::string& source_name = "<config>");
ExperimentConfig load_experiment(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Collects output files and writes manifest.json listing each with its SHA-256.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    /// Writes via a temporary file and rename; the file is listed in the manifest.
    void write(const std::string& name, const std::string& contents);
    /// Written the same way but left out of the manifest (run-dependent content).
    void write_unlisted(const std::string& name, const std::string& contents);
    /// Registers a file already written under root().
    void add_existing(const std::string& name);
    void write_manifest(const std::string& command, const std::string& canonical_config, std::uint64_t seed);

private:
    std::filesystem::path root_;
    std::vector<std::string> files_;
};

/// Error-vs-parameter-count plot data "family,network,d,params,mse": summary rows when present, else one per run.
/// Throws ArgumentError on empty input.
void write_param_plot(const std::vector<SweepRow>& rows, std::ostream& out);
/// Error-vs-energy plot data "family,network,mse,energy_j,area_m2". Throws ArgumentError on empty input.
void write_cost_plot(const std::vector<ParetoRow>& rows, std::ostream& out);
/// Decision surface "x1,x2,output" on a resolution x resolution grid over the raw
/// feature ranges (mapped onto the voltage range before evaluation). Throws StructuralError unless
/// the model has two inputs and one output.
void write_boundary_grid(const AkanModel& model, const std::array<Interval, 2>& raw_ranges, std::size_t resolution,
                         std::ostream& out);
/// Every surviving EP sampled on `points` input voltages: "layer,src,dst,v_in,output".
void write_edge_functions(const AkanModel& model, std::size_t points, std::ostream& out);

/// args[0] is the program name. Diagnostics go to `err` as a single line.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace akan::cli

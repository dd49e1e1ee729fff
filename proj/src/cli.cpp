#include "akan/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "akan/devlink.hpp"
#include "akan/surrogate.hpp"
#include "akan/textio.hpp"

namespace akan::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using textio::format_double;

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xf];
    }
    return out;
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

// ---------------------------------------------------------------------------
// Config parsing

namespace {

/// Typed access to one JSON object; finish() rejects keys that were never read.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw UsageError(where_ + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    std::optional<T> get(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw UsageError(where_ + "." + key + " has the wrong type");
        }
    }

    template <class T>
    T get_or(const std::string& key, T fallback) {
        auto v = get<T>(key);
        return v ? *v : fallback;
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw UsageError("unknown key '" + where_ + "." + it.key() + "'");
        }
    }

    const std::string& where() const noexcept { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

TaskKind task_kind_of(const std::string& name) {
    for (const auto& n : regression_task_names()) {
        if (n == name) return TaskKind::Regression;
    }
    if (name == "moons" || name == "spirals" || name == "tabular") return TaskKind::Classification;
    throw UsageError("unknown task '" + name + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

fs::path existing_file(const fs::path& base, const std::string& p, const std::string& what) {
    fs::path path = resolve(base, p);
    if (!fs::is_regular_file(path)) throw UsageError(what + " '" + path.string() + "' does not exist");
    return path;
}

void apply_train(const json& j, TrainConfig& tc, const std::string& where) {
    Fields f(j, where);
    tc.learning_rate = f.get_or("learning_rate", tc.learning_rate);
    tc.beta1 = f.get_or("beta1", tc.beta1);
    tc.beta2 = f.get_or("beta2", tc.beta2);
    tc.epsilon = f.get_or("epsilon", tc.epsilon);
    tc.epochs = f.get_or("epochs", tc.epochs);
    tc.batch_size = f.get_or("batch_size", tc.batch_size);
    tc.l1 = f.get_or("l1", tc.l1);
    tc.restarts = f.get_or("restarts", tc.restarts);
    tc.plateau_epochs = f.get_or("plateau_epochs", tc.plateau_epochs);
    tc.plateau_delta = f.get_or("plateau_delta", tc.plateau_delta);
    tc.divergence_threshold = f.get_or("divergence_threshold", tc.divergence_threshold);
    tc.threshold = f.get_or("threshold", tc.threshold);
    if (auto t = f.get<std::string>("taping")) {
        if (*t == "fused") tc.taping = DeviceTaping::Fused;
        else if (*t == "primitive") tc.taping = DeviceTaping::Primitive;
        else throw UsageError(where + ".taping must be fused or primitive");
    }
    f.finish();
}

json train_json(const TrainConfig& tc) {
    return json{{"learning_rate", tc.learning_rate},
                {"beta1", tc.beta1},
                {"beta2", tc.beta2},
                {"epsilon", tc.epsilon},
                {"epochs", tc.epochs},
                {"batch_size", tc.batch_size},
                {"l1", tc.l1},
                {"restarts", tc.restarts},
                {"seed", tc.seed},
                {"plateau_epochs", tc.plateau_epochs},
                {"plateau_delta", tc.plateau_delta},
                {"divergence_threshold", tc.divergence_threshold},
                {"task", tc.task == TaskKind::Regression ? "regression" : "classification"},
                {"threshold", tc.threshold},
                {"taping", tc.taping == DeviceTaping::Fused ? "fused" : "primitive"}};
}

template <class F>
auto usage_guard(F&& f) {
    try {
        return f();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    } catch (const StructuralError& e) {
        throw UsageError(e.what());
    }
}

/// Fine-tuning inherits the training settings with l1 off, one run and a tenfold smaller step.
TrainConfig finetune_defaults(const TrainConfig& train) {
    TrainConfig t = train;
    t.l1 = 0.0;
    t.restarts = 1;
    t.learning_rate = train.learning_rate / 10.0;
    return t;
}

json device_json(const DeviceSpec& d) {
    json j{{"kind", d.kind}};
    if (d.kind == "file") {
        j["file"] = d.file.filename().string();
        j["sha256"] = sha256_file(d.file);
    } else {
        j["seed"] = d.seed;
    }
    return j;
}

DeviceSpec parse_device(const json* j, const fs::path& base, std::uint64_t seed) {
    DeviceSpec d;
    d.seed = seed;
    if (!j) return d;
    Fields f(*j, "device");
    d.kind = f.get_or<std::string>("kind", "analytic");
    d.seed = f.get_or("seed", seed);
    if (auto file = f.get<std::string>("file")) {
        d.kind = "file";
        d.file = existing_file(base, *file, "device file");
    }
    if (d.kind != "analytic" && d.kind != "mlp" && d.kind != "file") {
        throw UsageError("device.kind must be analytic, mlp or file");
    }
    if (d.kind == "file" && d.file.empty()) throw UsageError("device.kind file needs device.file");
    f.finish();
    return d;
}

}  // namespace

std::shared_ptr<const DeviceModel> DeviceSpec::build() const {
    if (kind == "analytic") return AnalyticDevice::generate(seed);
    if (kind == "mlp") return MlpSurrogate::generate(seed);
    return load_device(file);
}

ExperimentConfig parse_experiment(const std::string& text, const fs::path& base_dir, const std::string& source_name) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(source_name + ": " + e.what());
    }
    Fields f(root, "config");
    ExperimentConfig cfg;
    auto seed = f.get<std::uint64_t>("seed");
    if (!seed) throw UsageError(source_name + ": 'seed' is required");
    cfg.seed = *seed;
    cfg.name = f.get_or<std::string>("name", "experiment");

    const json* task = f.child("task");
    if (!task) throw UsageError(source_name + ": 'task' is required");
    {
        Fields t(*task, "task");
        auto name = t.get<std::string>("name");
        if (!name) throw UsageError("task.name is required");
        cfg.task.name = *name;
        cfg.task.kind = task_kind_of(*name);
        cfg.task.samples = t.get_or<std::size_t>("samples", 1000);
        cfg.task.data_seed = t.get_or("data_seed", cfg.seed);
        const bool spirals = *name == "spirals";
        cfg.task.noise = t.get_or("noise", spirals ? 1.0 : 0.05);
        cfg.task.turns = t.get_or("turns", 1.0);
        cfg.task.train_fraction = t.get_or("train_fraction", 0.8);
        if (*name == "tabular") {
            auto schema = t.get<std::string>("schema");
            auto data = t.get<std::string>("data");
            if (!schema || !data) throw UsageError("tabular task needs task.schema and task.data");
            cfg.task.schema = existing_file(base_dir, *schema, "schema");
            cfg.task.data = existing_file(base_dir, *data, "data file");
        }
        if (cfg.task.samples == 0) throw UsageError("task.samples must be >= 1");
        if (!(cfg.task.train_fraction > 0.0 && cfg.task.train_fraction < 1.0)) {
            throw UsageError("task.train_fraction must be in (0, 1)");
        }
        t.finish();
    }

    auto topo = f.get<std::string>("topology");
    if (!topo) throw UsageError(source_name + ": 'topology' is required");
    cfg.topology = usage_guard([&] { return Topology::parse(*topo); });
    cfg.topology.skip_connections = f.get_or("skip_connections", false);

    cfg.device = parse_device(f.child("device"), base_dir, cfg.seed);

    cfg.train = cfg.task.kind == TaskKind::Regression ? TrainConfig::regression() : TrainConfig::classification();
    if (const json* tr = f.child("train")) apply_train(*tr, cfg.train, "train");
    cfg.train.seed = cfg.seed;
    usage_guard([&] {
        cfg.train.validate();
        return 0;
    });

    if (const json* pr = f.child("prune")) {
        Fields p(*pr, "prune");
        PruneConfig pc;
        pc.tau_act = p.get_or("tau_act", pc.tau_act);
        pc.tau_out = p.get_or("tau_out", pc.tau_out);
        cfg.prune_baseline = p.get_or("baseline", false);
        pc.finetune = finetune_defaults(cfg.train);
        if (const json* ft = p.child("finetune")) apply_train(*ft, pc.finetune, "prune.finetune");
        p.finish();
        usage_guard([&] {
            pc.validate();
            pc.finetune.validate();
            return 0;
        });
        cfg.prune = pc;
    }

    if (auto hw = f.get<std::string>("hardware")) cfg.hardware = existing_file(base_dir, *hw, "hardware spec");
    cfg.output_dir = f.get_or<std::string>("output_dir", "out/" + cfg.name);
    f.finish();

    if (cfg.task.kind == TaskKind::Regression) {
        const auto arity = regression_task(cfg.task.name).arity;
        if (arity != cfg.topology.inputs()) {
            throw UsageError("topology has " + std::to_string(cfg.topology.inputs()) + " inputs but task '" +
                             cfg.task.name + "' has " + std::to_string(arity));
        }
    }

    json c;
    c["name"] = cfg.name;
    c["seed"] = cfg.seed;
    json tj{{"name", cfg.task.name}, {"samples", cfg.task.samples}, {"data_seed", cfg.task.data_seed}};
    if (cfg.task.kind == TaskKind::Classification) {
        tj["train_fraction"] = cfg.task.train_fraction;
        if (cfg.task.name == "moons" || cfg.task.name == "spirals") tj["noise"] = cfg.task.noise;
        if (cfg.task.name == "spirals") tj["turns"] = cfg.task.turns;
        if (cfg.task.name == "tabular") {
            tj["schema_sha256"] = sha256_file(cfg.task.schema);
            tj["data_sha256"] = sha256_file(cfg.task.data);
        }
    }
    c["task"] = tj;
    c["topology"] = cfg.topology.to_string();
    c["skip_connections"] = cfg.topology.skip_connections;
    c["device"] = device_json(cfg.device);
    c["train"] = train_json(cfg.train);
    if (cfg.prune) {
        c["prune"] = json{{"tau_act", cfg.prune->tau_act},
                          {"tau_out", cfg.prune->tau_out},
                          {"baseline", cfg.prune_baseline},
                          {"finetune", train_json(cfg.prune->finetune)}};
    }
    if (cfg.hardware) c["hardware_sha256"] = sha256_file(*cfg.hardware);
    cfg.canonical = c.dump(2) + "\n";
    return cfg;
}

ExperimentConfig load_experiment(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("config '" + path.string() + "' does not exist");
    return parse_experiment(read_file(path), path.parent_path(), path.string());
}

// ---------------------------------------------------------------------------
// Output directory and manifest

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw Error("cannot create output directory '" + root_.string() + "': " + ec.message());
}

void OutputDir::write_unlisted(const std::string& name, const std::string& contents) {
    const fs::path target = root_ / name;
    const fs::path tmp = root_ / (name + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << contents;
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, target);
}

void OutputDir::write(const std::string& name, const std::string& contents) {
    write_unlisted(name, contents);
    add_existing(name);
}

void OutputDir::add_existing(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void OutputDir::write_manifest(const std::string& command, const std::string& canonical_config, std::uint64_t seed) {
    write("config.json", canonical_config);
    auto names = files_;
    std::sort(names.begin(), names.end());
    json files = json::array();
    for (const auto& n : names) files.push_back(json{{"name", n}, {"sha256", sha256_file(root_ / n)}});
    json m{{"tool", "akan"},
           {"version", AKAN_VERSION},
           {"command", command},
           {"config_sha256", sha256_hex(canonical_config)},
           {"seed", seed},
           {"files", files}};
    write_unlisted("manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Plot data

void write_param_plot(const std::vector<SweepRow>& rows, std::ostream& out) {
    if (rows.empty()) throw ArgumentError("no sweep results to plot");
    const bool summary = std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.seed; });
    out << "family,network,d,params,mse\n";
    for (const auto& r : rows) {
        if (summary == r.seed.has_value()) continue;
        out << to_string(r.cell.family) << ",\"" << r.cell.network() << "\"," << r.cell.rnpus_per_ep << ',' << r.params
            << ',' << format_double(r.mse) << '\n';
    }
}

void write_cost_plot(const std::vector<ParetoRow>& rows, std::ostream& out) {
    if (rows.empty()) throw ArgumentError("no cost rows to plot");
    out << "family,network,mse,energy_j,area_m2\n";
    for (const auto& r : rows) {
        out << r.family << ",\"" << r.network << "\"," << format_double(r.mse) << ',' << format_double(r.energy) << ','
            << format_double(r.area) << '\n';
    }
}

void write_boundary_grid(const AkanModel& model, const std::array<Interval, 2>& raw_ranges, std::size_t resolution,
                         std::ostream& out) {
    if (model.topology.inputs() != 2 || model.topology.outputs() != 1) {
        throw StructuralError("decision grid needs a model with 2 inputs and 1 output");
    }
    if (resolution < 2) throw ArgumentError("grid resolution must be >= 2");
    const Interval voltage = model.voltage_range();
    auto coord = [&](const Interval& r, std::size_t i) {
        const double t = static_cast<double>(i) / static_cast<double>(resolution - 1);
        return (1.0 - t) * r.lo + t * r.hi;
    };
    auto to_voltage = [&](const Interval& r, double x) {
        return r.lo < r.hi ? r.map_to(voltage, x) : 0.5 * (voltage.lo + voltage.hi);
    };
    std::vector<double> features;
    features.reserve(2 * resolution * resolution);
    for (std::size_t i = 0; i < resolution; ++i) {
        for (std::size_t j = 0; j < resolution; ++j) {
            features.push_back(to_voltage(raw_ranges[0], coord(raw_ranges[0], i)));
            features.push_back(to_voltage(raw_ranges[1], coord(raw_ranges[1], j)));
        }
    }
    const auto y = akan_forward_batch(model, features);
    out << "x1,x2,output\n";
    for (std::size_t i = 0; i < resolution; ++i) {
        for (std::size_t j = 0; j < resolution; ++j) {
            out << format_double(coord(raw_ranges[0], i)) << ',' << format_double(coord(raw_ranges[1], j)) << ','
                << format_double(y[i * resolution + j]) << '\n';
        }
    }
}

void write_edge_functions(const AkanModel& model, std::size_t points, std::ostream& out) {
    if (points < 2) throw ArgumentError("edge function sampling needs >= 2 points");
    const Interval voltage = model.voltage_range();
    out << "layer,src,dst,v_in,output\n";
    for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
        const auto& layer = model.params.layers[l];
        for (std::size_t s = 0; s < layer.n_in; ++s) {
            for (std::size_t d = 0; d < layer.n_out; ++d) {
                const auto& ep = layer.edge(s, d);
                if (!ep) continue;
                for (std::size_t i = 0; i < points; ++i) {
                    const double t = static_cast<double>(i) / static_cast<double>(points - 1);
                    const double v = (1.0 - t) * voltage.lo + t * voltage.hi;
                    out << l << ',' << s << ',' << d << ',' << format_double(v) << ','
                        << format_double(ep_forward(*ep, v, *model.device)) << '\n';
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

template <class F>
std::string render(F&& f) {
    std::ostringstream ss;
    f(ss);
    return ss.str();
}

fs::path output_root(const std::string& flag, const fs::path& fallback) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return fallback;
}

Endpoint endpoint_from(const std::string& flag, bool required) {
    std::string text = flag;
    if (text.empty()) {
        if (const char* env = std::getenv(kEndpointEnv); env && *env) text = env;
    }
    if (text.empty()) {
        if (required) throw UsageError(std::string("no endpoint given (use --endpoint or ") + kEndpointEnv + ")");
        text = "127.0.0.1:5025";
    }
    return usage_guard([&] { return Endpoint::parse(text); });
}

struct PreparedData {
    Dataset train;
    std::optional<Dataset> validation;
    std::optional<TargetBatch> targets;
    std::vector<Interval> raw_ranges;
};

LabeledData labeled_data(const TaskSpec& t) {
    if (t.name == "moons") return make_moons(t.samples, t.noise, t.data_seed);
    if (t.name == "spirals") return make_spirals(t.samples, t.turns, t.noise, t.data_seed);
    const TabularSchema schema = TabularSchema::load(t.schema);
    return load_tabular(t.data, schema);
}

PreparedData prepare_data(const TaskSpec& t, const DeviceModel& device, std::uint64_t split_seed) {
    PreparedData p;
    if (t.kind == TaskKind::Regression) {
        auto rd = make_regression_data(regression_task(t.name), t.samples, t.data_seed);
        p.train = std::move(rd.data);
        p.targets = std::move(rd.targets);
        return p;
    }
    const LabeledData raw = labeled_data(t);
    auto cd = make_classification_data(raw, device.ranges().common_voltage(), t.train_fraction, split_seed);
    p.train = std::move(cd.train);
    p.validation = std::move(cd.validation);
    p.raw_ranges = std::move(cd.raw_ranges);
    return p;
}

double accuracy_on(const AkanModel& model, const Dataset& data, double threshold) {
    return classification_metrics(akan_forward_batch(model, data.features), data.targets, threshold);
}

std::string model_text(const AkanModel& model) {
    return render([&](std::ostream& o) { save_model(model, o, "device.akan"); });
}

void write_predictions(OutputDir& dir, const Dataset& data, const TargetBatch* targets, const AkanModel& model,
                       const std::vector<double>* lo, const std::vector<double>* hi) {
    const auto pred = akan_forward_batch(model, data.features);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.row(a)[0] < data.row(b)[0]; });
    dir.write("predictions.csv", render([&](std::ostream& o) {
                  for (std::size_t j = 0; j < data.n_features; ++j) o << 'x' << j << ',';
                  o << "target,prediction";
                  if (targets) o << ",target_raw,prediction_raw";
                  if (lo) o << ",envelope_lo,envelope_hi";
                  o << '\n';
                  for (auto i : order) {
                      for (double x : data.row(i)) o << format_double(x) << ',';
                      o << format_double(data.targets[i]) << ',' << format_double(pred[i]);
                      if (targets) {
                          o << ',' << format_double(targets->raw[i]) << ','
                            << format_double(targets->map.invert(pred[i]));
                      }
                      if (lo) o << ',' << format_double((*lo)[i]) << ',' << format_double((*hi)[i]);
                      o << '\n';
                  }
              }));
}

// train ---------------------------------------------------------------------

int cmd_train(const ExperimentConfig& cfg, const fs::path& root, bool timing, std::ostream& log) {
    auto device = cfg.device.build();
    const PreparedData data = prepare_data(cfg.task, *device, cfg.seed);
    const RestartResult rr = multi_restart(cfg.topology, device, data.train, cfg.train);
    const TrainResult& best = rr.best();
    const bool classify = cfg.task.kind == TaskKind::Classification;

    OutputDir dir(root);
    dir.write("device.akan", render([&](std::ostream& o) { save_device(*device, o); }));
    dir.write("model.akan", model_text(best.model));
    dir.write("loss.csv", render([&](std::ostream& o) { write_trace_csv(best.report, o); }));
    dir.write("restarts.csv", render([&](std::ostream& o) {
                  o << "rank,seed,best_loss,best_mse,best_metric,best_epoch,epochs_run,diverged,plateau_stopped";
                  if (classify) o << ",validation_accuracy";
                  o << '\n';
                  for (std::size_t r = 0; r < rr.runs.size(); ++r) {
                      const auto& rep = rr.runs[r].report;
                      o << r << ',' << rr.seeds[r] << ',' << format_double(rep.best_loss) << ','
                        << format_double(rep.best_mse) << ',' << format_double(rep.best_metric) << ',' << rep.best_epoch
                        << ',' << rep.epochs_run << ',' << (rep.diverged ? 1 : 0) << ',' << (rep.plateau_stopped ? 1 : 0);
                      if (classify) o << ',' << format_double(accuracy_on(rr.runs[r].model, *data.validation, cfg.train.threshold));
                      o << '\n';
                  }
              }));
    dir.write("edges.csv", render([&](std::ostream& o) { write_edge_functions(best.model, 101, o); }));
    if (classify) {
        const double acc_train = accuracy_on(best.model, data.train, cfg.train.threshold);
        const double acc_val = accuracy_on(best.model, *data.validation, cfg.train.threshold);
        dir.write("metrics.csv", render([&](std::ostream& o) {
                      o << "split,samples,mse,accuracy\n";
                      o << "train," << data.train.size() << ',' << format_double(dataset_mse(best.model, data.train)) << ','
                        << format_double(acc_train) << '\n';
                      o << "validation," << data.validation->size() << ','
                        << format_double(dataset_mse(best.model, *data.validation)) << ',' << format_double(acc_val)
                        << '\n';
                  }));
        if (data.raw_ranges.size() == 2 && cfg.topology.outputs() == 1) {
            dir.write("boundary.csv", render([&](std::ostream& o) {
                          write_boundary_grid(best.model, {data.raw_ranges[0], data.raw_ranges[1]}, 200, o);
                      }));
        }
        log << "train " << cfg.name << ": " << cfg.topology.to_string() << " validation accuracy "
            << format_double(acc_val) << " (best of " << rr.runs.size() << ")\n";
    } else {
        write_predictions(dir, data.train, &*data.targets, best.model, &rr.envelope_lo, &rr.envelope_hi);
        log << "train " << cfg.name << ": " << cfg.topology.to_string() << " best MSE "
            << format_double(best.report.best_mse) << " (best of " << rr.runs.size() << ", top-" << rr.top_k
            << " spread " << format_double(rr.spread) << ")\n";
    }
    if (timing) {
        dir.write_unlisted("timing.csv", render([&](std::ostream& o) {
                               o << "seed,wall_seconds\n";
                               for (std::size_t r = 0; r < rr.runs.size(); ++r) {
                                   o << rr.seeds[r] << ',' << format_double(rr.runs[r].report.wall_seconds) << '\n';
                               }
                           }));
    }
    dir.write_manifest("train", cfg.canonical, cfg.seed);
    log << "wrote " << dir.root().string() << '\n';
    return kExitOk;
}

// prune ---------------------------------------------------------------------

int cmd_prune(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
    PruneConfig pc;
    if (cfg.prune) pc = *cfg.prune;
    else pc.finetune = finetune_defaults(cfg.train);
    auto device = cfg.device.build();
    const PreparedData data = prepare_data(cfg.task, *device, cfg.seed);

    std::optional<double> mse_unreg;
    if (cfg.prune_baseline) {
        TrainConfig plain = cfg.train;
        plain.l1 = 0.0;
        mse_unreg = multi_restart(cfg.topology, device, data.train, plain).best().report.best_mse;
    }
    const RestartResult reg = multi_restart(cfg.topology, device, data.train, cfg.train);
    const TrainResult& regularized = reg.best();
    const PipelineReport rep = prune_and_finetune(regularized.model, data.train, pc, mse_unreg);

    OutputDir dir(root);
    dir.write("device.akan", render([&](std::ostream& o) { save_device(*device, o); }));
    dir.write("regularized.akan", model_text(regularized.model));
    dir.write("pruned.akan", model_text(rep.pruned.model));
    dir.write("finetuned.akan", model_text(rep.finetuned.model));
    dir.write("loss_regularized.csv", render([&](std::ostream& o) { write_trace_csv(regularized.report, o); }));
    dir.write("loss_finetuned.csv", render([&](std::ostream& o) { write_trace_csv(rep.finetuned.report, o); }));
    dir.write("removal.csv", render([&](std::ostream& o) { write_removal_csv(rep.pruned.log, o); }));
    dir.write("edges_regularized.csv", render([&](std::ostream& o) { write_edge_functions(absorb_gains(regularized.model), 101, o); }));
    dir.write("edges_finetuned.csv", render([&](std::ostream& o) { write_edge_functions(rep.finetuned.model, 101, o); }));
    dir.write("pipeline.csv", render([&](std::ostream& o) {
                  o << "stage,mse,eps,rnpus,params\n";
                  const std::size_t eps0 = regularized.model.active_ep_count();
                  const std::size_t rn0 = regularized.model.active_rnpu_count();
                  const std::size_t p0 = trainable_parameter_count(regularized.model);
                  if (rep.mse_unregularized) {
                      o << "unregularized," << format_double(*rep.mse_unregularized) << ',' << eps0 << ',' << rn0 << ','
                        << p0 - eps0 << '\n';
                  }
                  o << "regularized," << format_double(rep.mse_regularized) << ',' << eps0 << ',' << rn0 << ',' << p0
                    << '\n';
                  o << "pruned," << format_double(rep.mse_pruned) << ',' << rep.pruned.model.active_ep_count() << ','
                    << rep.pruned.model.active_rnpu_count() << ',' << rep.pruned.params_after << '\n';
                  o << "finetuned," << format_double(rep.mse_finetuned) << ',' << rep.finetuned.model.active_ep_count()
                    << ',' << rep.finetuned.model.active_rnpu_count() << ','
                    << trainable_parameter_count(rep.finetuned.model) << '\n';
              }));
    dir.write_manifest("prune", cfg.canonical, cfg.seed);
    log << "prune " << cfg.name << ": removed " << rep.pruned.eps_before - rep.pruned.eps_after << " of "
        << rep.pruned.eps_before << " EPs; MSE regularized " << format_double(rep.mse_regularized) << ", pruned "
        << format_double(rep.mse_pruned) << ", fine-tuned " << format_double(rep.mse_finetuned) << '\n';
    log << "wrote " << dir.root().string() << '\n';
    return kExitOk;
}

// sweep ---------------------------------------------------------------------

struct SweepArgs {
    std::string grid;
    std::string config;
    std::size_t seeds = 5;
    std::uint64_t seed = 0;
    std::size_t samples = 1000;
    std::size_t epochs = 0;
    std::size_t workers = 1;
    bool timing = false;
    std::string output_dir;
};

int cmd_sweep(const SweepArgs& a, std::ostream& log) {
    const SweepGrid grid = usage_guard([&] { return named_grid(a.grid); });
    DeviceSpec device;
    SweepOptions opt;
    std::uint64_t base = a.seed;
    std::string config_sha;
    if (!a.config.empty()) {
        const auto cfg = load_experiment(a.config);
        base = cfg.seed;
        device = cfg.device;
        opt.train = cfg.train;
        config_sha = sha256_hex(cfg.canonical);
    } else {
        device.seed = base;
    }
    if (a.seeds == 0) throw UsageError("--seeds must be >= 1");
    if (a.workers == 0) throw UsageError("--workers must be >= 1");
    if (a.samples == 0) throw UsageError("--samples must be >= 1");
    if (a.epochs > 0) opt.train.epochs = a.epochs;
    opt.train.restarts = 1;
    opt.seeds.clear();
    for (std::size_t s = 0; s < a.seeds; ++s) opt.seeds.push_back(base + s);
    opt.samples = a.samples;
    opt.data_seed = base;
    opt.workers = a.workers;
    opt.progress = [&](const SweepRow& r) {
        log << r.cell.network() << " seed " << *r.seed << " mse " << format_double(r.mse) << '\n';
    };

    const auto rows = sweep(regression_task(grid.task), grid, device.build(), opt);
    std::vector<SweepRow> runs, summaries;
    for (const auto& r : rows) (r.seed ? runs : summaries).push_back(r);

    OutputDir dir(output_root(a.output_dir, "out/sweep-" + grid.name));
    dir.write("sweep.csv", render([&](std::ostream& o) { write_sweep_csv(runs, o); }));
    dir.write("sweep_summary.csv", render([&](std::ostream& o) { write_sweep_csv(summaries, o); }));
    dir.write("param_plot.csv", render([&](std::ostream& o) { write_param_plot(rows, o); }));
    if (a.timing) dir.write_unlisted("sweep_timing.csv", render([&](std::ostream& o) { write_sweep_timing_csv(rows, o); }));

    json c{{"grid", grid.name},
           {"task", grid.task},
           {"seeds", opt.seeds},
           {"samples", opt.samples},
           {"data_seed", opt.data_seed},
           {"device", device_json(device)},
           {"train", train_json(opt.train)}};
    if (!config_sha.empty()) c["config_sha256"] = config_sha;
    dir.write_manifest("sweep", c.dump(2) + "\n", base);
    log << "sweep " << grid.name << ": " << runs.size() << " runs over " << grid.cells.size() << " configurations\n";
    log << "wrote " << dir.root().string() << '\n';
    return kExitOk;
}

// estimate ------------------------------------------------------------------

struct EstimateArgs {
    std::string topology;
    std::string model;
    std::string mlp;
    std::size_t samples = 1;
    std::string hardware;
    std::string digital;
    std::string mode = "per-sample";
    std::vector<std::string> sweeps;
    std::string output_dir;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
    const int sources = !a.topology.empty() + !a.model.empty() + !a.mlp.empty() + !a.sweeps.empty();
    if (sources == 0) throw UsageError("estimate needs --topology, --model, --mlp or --sweep");
    if (a.samples == 0) throw UsageError("--samples must be >= 1");
    EnergyMode mode;
    if (a.mode == "per-sample") mode = EnergyMode::PerSample;
    else if (a.mode == "literal") mode = EnergyMode::Literal;
    else throw UsageError("--mode must be per-sample or literal");

    HardwareSpec hw;
    json c{{"samples", a.samples}, {"mode", a.mode}};
    if (!a.hardware.empty()) {
        hw = usage_guard([&] { return HardwareSpec::load(existing_file(".", a.hardware, "hardware spec")); });
        c["hardware_sha256"] = sha256_file(a.hardware);
    }
    usage_guard([&] {
        hw.validate();
        return 0;
    });
    for (const auto& w : hw.warnings()) err << "warning: " << w << '\n';
    std::optional<DigitalSpec> digital;
    if (!a.digital.empty()) {
        digital = usage_guard([&] { return DigitalSpec::load(existing_file(".", a.digital, "digital spec")); });
        c["digital_sha256"] = sha256_file(a.digital);
    }

    OutputDir dir(output_root(a.output_dir, "out/estimate"));
    if (!a.topology.empty() || !a.model.empty()) {
        NetworkCounts counts;
        std::string label;
        if (!a.model.empty()) {
            const AkanModel m = load_model(existing_file(".", a.model, "model"));
            counts = counts_from_model(m, a.samples);
            label = m.topology.to_string();
            c["model_sha256"] = sha256_file(a.model);
        } else {
            const Topology t = usage_guard([&] { return Topology::parse(a.topology); });
            counts = counts_from_topology(t, a.samples);
            label = t.to_string();
            c["topology"] = label;
        }
        const CostReport r = energy(counts, hw, mode);
        dir.write("cost.csv", render([&](std::ostream& o) { write_cost_csv(label, r, o); }));
        out << label << " P=" << a.samples << ": t_d " << format_double(r.t_d) << " s, E_total "
            << format_double(r.e_total) << " J (" << format_double(r.per_inference()) << " J per inference), area "
            << format_double(r.area.total) << " m^2\n";
    }
    if (!a.mlp.empty()) {
        if (!digital) throw UsageError("--mlp needs --digital");
        const auto widths = usage_guard([&] { return parse_widths(a.mlp); });
        const auto r = mlp_cost(widths, *digital, a.samples);
        c["mlp"] = format_widths(widths);
        dir.write("mlp_cost.csv", render([&](std::ostream& o) {
                      o << "network,P,macs,activations,cycles,latency_s,energy_per_inference_j,energy_j,area_m2\n";
                      o << '"' << format_widths(widths) << "\"," << r.samples << ',' << r.macs << ',' << r.activations
                        << ',' << r.cycles << ',' << format_double(r.latency) << ','
                        << format_double(r.energy_per_inference) << ',' << format_double(r.energy_total) << ','
                        << format_double(r.area) << '\n';
                  }));
        out << format_widths(widths) << " digital: " << r.cycles << " cycles, latency " << format_double(r.latency)
            << " s, " << format_double(r.energy_per_inference) << " J per inference\n";
    }
    if (!a.sweeps.empty()) {
        std::vector<SweepCsvRow> rows;
        json hashes = json::array();
        for (const auto& s : a.sweeps) {
            const fs::path p = existing_file(".", s, "sweep results");
            std::ifstream in(p);
            auto part = read_sweep_csv(in, p.string());
            rows.insert(rows.end(), part.begin(), part.end());
            hashes.push_back(sha256_file(p));
        }
        c["sweeps_sha256"] = hashes;
        const bool has_mlp = std::any_of(rows.begin(), rows.end(), [](const SweepCsvRow& r) { return r.family != "akan"; });
        if (has_mlp && !digital) throw UsageError("sweep results contain MLP rows; pass --digital");
        const auto pareto = pareto_sweep(rows, hw, digital ? *digital : DigitalSpec{}, a.samples);
        dir.write("pareto.csv", render([&](std::ostream& o) { write_pareto_csv(pareto, o); }));
        dir.write("cost_plot.csv", render([&](std::ostream& o) { write_cost_plot(pareto, o); }));
        const double ratio = max_energy_ratio_at_matched_mse(pareto);
        out << pareto.size() << " cost rows; largest MLP/aKAN energy ratio at matched MSE: " << format_double(ratio)
            << '\n';
    }
    dir.write_manifest("estimate", c.dump(2) + "\n", 0);
    return kExitOk;
}

// gen-data ------------------------------------------------------------------

struct GenArgs {
    std::string task;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
    std::optional<double> noise;
    double turns = 1.0;
    std::string schema;
    std::string data;
    std::string output_dir;
};

int cmd_gen_data(const GenArgs& a, std::ostream& out) {
    TaskSpec t;
    t.name = a.task;
    t.kind = task_kind_of(a.task);
    t.samples = a.samples;
    t.data_seed = a.seed;
    t.noise = a.noise ? *a.noise : (a.task == "spirals" ? 1.0 : 0.05);
    t.turns = a.turns;
    if (a.samples == 0) throw UsageError("--samples must be >= 1");
    if (a.task == "tabular") {
        if (a.schema.empty() || a.data.empty()) throw UsageError("tabular needs --schema and --data");
        t.schema = existing_file(".", a.schema, "schema");
        t.data = existing_file(".", a.data, "data file");
    }
    json c{{"task", t.name}, {"samples", t.samples}, {"seed", t.data_seed}};
    Dataset d;
    if (t.kind == TaskKind::Regression) {
        d = make_regression_data(regression_task(t.name), t.samples, t.data_seed).data;
    } else {
        const LabeledData raw = usage_guard([&] { return labeled_data(t); });
        d.n_features = raw.n_features;
        d.features = raw.features;
        d.targets.assign(raw.labels.begin(), raw.labels.end());
        c["noise"] = t.noise;
        if (t.name == "spirals") c["turns"] = t.turns;
        if (t.name == "tabular") {
            c["schema_sha256"] = sha256_file(t.schema);
            c["data_sha256"] = sha256_file(t.data);
        }
    }
    OutputDir dir(output_root(a.output_dir, "out/data-" + t.name));
    dir.write("data.csv", render([&](std::ostream& o) { write_dataset_csv(d, o); }));
    dir.write_manifest("gen-data", c.dump(2) + "\n", t.data_seed);
    out << "wrote " << d.size() << " rows to " << (dir.root() / "data.csv").string() << '\n';
    return kExitOk;
}

// serve-device / infer-remote ----------------------------------------------------

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

std::shared_ptr<const DeviceModel> device_from_spec(const std::string& spec) {
    auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
    if (kind == "analytic" || kind == "mlp") {
        std::uint64_t seed = 0;
        if (!arg.empty()) {
            char* end = nullptr;
            seed = std::strtoull(arg.c_str(), &end, 10);
            if (*end != '\0') throw UsageError("bad device seed '" + arg + "'");
        }
        if (kind == "analytic") return AnalyticDevice::generate(seed);
        return MlpSurrogate::generate(seed);
    }
    if (kind == "model") return load_model(existing_file(".", arg, "model")).device;
    if (kind == "file") return load_device(existing_file(".", arg, "device file"));
    throw UsageError("device must be analytic[:seed], mlp[:seed], model:<path> or file:<path>");
}

int cmd_serve(const std::string& device_spec, const std::string& endpoint, double settle, double duration,
              std::ostream& out) {
    if (!(settle >= 0.0)) throw UsageError("--settle must be >= 0");
    ServerConfig sc;
    sc.device = device_from_spec(device_spec);
    sc.settle_seconds = settle;
    sc.endpoint = endpoint_from(endpoint, false);
    MeasurementServer server(sc);
    server.start();
    out << "listening on " << sc.endpoint.host << ':' << server.port() << std::endl;
    g_interrupted = false;
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted) {
        if (duration > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= duration) {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    server.stop();
    out << "served " << server.requests_served() << " requests" << std::endl;
    return kExitOk;
}

int cmd_infer_remote(const std::string& model_path, const std::string& data_path, const std::string& endpoint,
                     std::size_t limit, const std::string& output_root_flag, std::ostream& out) {
    const AkanModel model = load_model(existing_file(".", model_path, "model"));
    const fs::path dp = existing_file(".", data_path, "data file");
    std::ifstream in(dp);
    Dataset data = read_dataset_csv(in, dp.string());
    if (data.n_features != model.topology.inputs()) {
        throw UsageError("data has " + std::to_string(data.n_features) + " features, model expects " +
                         std::to_string(model.topology.inputs()));
    }
    if (limit > 0 && limit < data.size()) {
        std::vector<std::size_t> idx(limit);
        std::iota(idx.begin(), idx.end(), 0);
        data = data.subset(idx);
    }
    const Endpoint ep = endpoint_from(endpoint, true);
    DeviceClient client(ep);
    const auto remote = timemux_infer_batch(model, data.features, client);
    const auto local = akan_forward_batch(model, data.features);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < remote.size(); ++i) max_diff = std::max(max_diff, std::abs(remote[i] - local[i]));

    const std::size_t n_out = model.topology.outputs();
    OutputDir dir(output_root(output_root_flag, "out/infer-remote"));
    dir.write("predictions.csv", render([&](std::ostream& o) {
                  o << "index";
                  for (std::size_t k = 0; k < n_out; ++k) o << ",y" << k;
                  o << '\n';
                  for (std::size_t i = 0; i < data.size(); ++i) {
                      o << i;
                      for (std::size_t k = 0; k < n_out; ++k) o << ',' << format_double(remote[i * n_out + k]);
                      o << '\n';
                  }
              }));
    json c{{"model_sha256", sha256_file(model_path)}, {"data_sha256", sha256_file(dp)}, {"limit", limit}};
    dir.write_manifest("infer-remote", c.dump(2) + "\n", 0);
    out << data.size() << " samples, " << client.requests_sent() << " requests ("
        << client.requests_sent() / std::max<std::size_t>(1, data.size()) << " per sample), max |remote - local| "
        << format_double(max_diff) << '\n';
    return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Train, prune and cost-model analog Kolmogorov-Arnold networks", "akan"};
    app.require_subcommand(1);
    app.set_version_flag("--version", AKAN_VERSION);

    std::string config, output_dir;
    bool timing = false;

    auto* train = app.add_subcommand("train", "Train a model from an experiment config");
    train->add_option("-c,--config", config, "Experiment config (JSON)")->required();
    train->add_option("-o,--output-dir", output_dir, "Output directory");
    train->add_flag("--timing", timing, "Also write wall-clock timings (not in the manifest)");

    auto* prune = app.add_subcommand("prune", "Regularized training, pruning and fine-tuning");
    prune->add_option("-c,--config", config, "Experiment config (JSON)")->required();
    prune->add_option("-o,--output-dir", output_dir, "Output directory");
    double tau_act = 0.0, tau_out = 0.0;
    prune->add_option("--tau-act", tau_act, "Override the activation threshold");
    prune->add_option("--tau-out", tau_out, "Override the contribution threshold");

    SweepArgs sa;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a named configuration grid");
    sweep_cmd->add_option("-g,--grid", sa.grid, "Grid name")->required();
    sweep_cmd->add_option("-c,--config", sa.config, "Experiment config providing device and training settings");
    sweep_cmd->add_option("--seeds", sa.seeds, "Runs per configuration");
    sweep_cmd->add_option("--seed", sa.seed, "Base seed when no config is given");
    sweep_cmd->add_option("--samples", sa.samples, "Training samples");
    sweep_cmd->add_option("--epochs", sa.epochs, "Override the epoch count");
    sweep_cmd->add_option("-j,--workers", sa.workers, "Concurrent training runs");
    sweep_cmd->add_option("-o,--output-dir", sa.output_dir, "Output directory");
    sweep_cmd->add_flag("--timing", sa.timing, "Also write per-run wall-clock times");

    EstimateArgs ea;
    auto* estimate = app.add_subcommand("estimate", "Energy, latency and area estimates");
    estimate->add_option("-t,--topology", ea.topology, "aKAN topology, e.g. [2,1,1]x3");
    estimate->add_option("-m,--model", ea.model, "Model checkpoint (counts surviving EPs only)");
    estimate->add_option("--mlp", ea.mlp, "Digital MLP widths, e.g. [2,200,1]");
    estimate->add_option("-P,--samples", ea.samples, "Samples per batch");
    estimate->add_option("--hardware", ea.hardware, "Hardware spec (JSON)");
    estimate->add_option("--digital", ea.digital, "Digital MLP cost constants (JSON)");
    estimate->add_option("--mode", ea.mode, "per-sample or literal");
    estimate->add_option("--sweep", ea.sweeps, "Sweep results CSV (repeatable)");
    estimate->add_option("-o,--output-dir", ea.output_dir, "Output directory");

    GenArgs ga;
    auto* gen = app.add_subcommand("gen-data", "Write a task dataset as CSV");
    gen->add_option("--task", ga.task, "sine, bessel, exp2, exp4, moons, spirals or tabular")->required();
    gen->add_option("-n,--samples", ga.samples, "Rows");
    gen->add_option("--seed", ga.seed, "Seed");
    gen->add_option("--noise", ga.noise, "Noise level");
    gen->add_option("--turns", ga.turns, "Spiral turns");
    gen->add_option("--schema", ga.schema, "Tabular schema (JSON)");
    gen->add_option("--data", ga.data, "Tabular data file");
    gen->add_option("-o,--output-dir", ga.output_dir, "Output directory");

    std::string device_spec = "analytic:0", endpoint;
    double settle = kDefaultSettleSeconds, duration = 0.0;
    auto* serve = app.add_subcommand("serve-device", "Serve a virtual RNPU over TCP");
    serve->add_option("--device", device_spec, "analytic[:seed], mlp[:seed], model:<path> or file:<path>");
    serve->add_option("-e,--endpoint", endpoint, "Listen address host:port");
    serve->add_option("--settle", settle, "Settle delay per measurement (s)");
    serve->add_option("--duration", duration, "Stop after this many seconds (0 = until interrupted)");

    std::string model_path, data_path;
    std::size_t limit = 0;
    auto* infer = app.add_subcommand("infer-remote", "Time-multiplexed inference against a device server");
    infer->add_option("-m,--model", model_path, "Model checkpoint")->required();
    infer->add_option("-d,--data", data_path, "Dataset CSV")->required();
    infer->add_option("-e,--endpoint", endpoint, "Server address host:port");
    infer->add_option("--limit", limit, "Evaluate only the first N rows");
    infer->add_option("-o,--output-dir", output_dir, "Output directory");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << AKAN_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "akan: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*train || *prune) {
            auto cfg = load_experiment(config);
            if (*prune && (tau_act > 0.0 || tau_out > 0.0)) {
                if (!cfg.prune) {
                    cfg.prune = PruneConfig{};
                    cfg.prune->finetune = finetune_defaults(cfg.train);
                }
                if (tau_act > 0.0) cfg.prune->tau_act = tau_act;
                if (tau_out > 0.0) cfg.prune->tau_out = tau_out;
                auto c = json::parse(cfg.canonical);
                c["prune"]["tau_act"] = cfg.prune->tau_act;
                c["prune"]["tau_out"] = cfg.prune->tau_out;
                c["prune"]["baseline"] = cfg.prune_baseline;
                c["prune"]["finetune"] = train_json(cfg.prune->finetune);
                cfg.canonical = c.dump(2) + "\n";
            }
            const fs::path root = output_root(output_dir, cfg.output_dir);
            return *train ? cmd_train(cfg, root, timing, out) : cmd_prune(cfg, root, out);
        }
        if (*sweep_cmd) return cmd_sweep(sa, out);
        if (*estimate) return cmd_estimate(ea, out, err);
        if (*gen) return cmd_gen_data(ga, out);
        if (*serve) return cmd_serve(device_spec, endpoint, settle, duration, out);
        if (*infer) return cmd_infer_remote(model_path, data_path, endpoint, limit, output_dir, out);
    } catch (const UsageError& e) {
        err << "akan: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        // malformed input files are usage errors
        err << "akan: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "akan: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace akan::cli

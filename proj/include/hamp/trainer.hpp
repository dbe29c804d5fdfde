#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hamp/model.hpp"
#include "hamp/synth.hpp"

namespace hamp {

struct TrainConfig {
    Mode mode = Mode::hamp1;
    DynamicsParams dynamics;
    std::size_t hidden_dim = 32;
    std::size_t classifier_hidden_dim = 32;
    int classifier_layers = 1;
    double dropout = 0.0;
    int epochs = 500;
    int patience = 50;
    double learning_rate = 0.001;
    std::vector<std::uint64_t> seeds = {0};
    int jobs = 1;

    bool repulsion_on = true;
    bool allen_cahn_on = true;
    bool noise_on = true;

    DatasetPaths dataset;

    void validate() const;
};

// Strict JSON round-trip: unknown keys anywhere are a ConfigError.
TrainConfig train_config_from_json(const std::string& text,
                                   const std::filesystem::path& base_dir);
std::string train_config_to_json(const TrainConfig& cfg);

struct SeedRun {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure;
    double test_accuracy = 0.0;
    double best_val_accuracy = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;
    double mean_epoch_seconds = 0.0;
    std::vector<double> train_loss;   // per epoch
    std::vector<double> val_accuracy; // per epoch
};

struct RunResult {
    std::vector<SeedRun> seeds;
    double mean_test_accuracy = 0.0;
    double std_test_accuracy = 0.0;
    std::size_t failed_count = 0;
    EnergyTrace final_trace; // eval-pass dynamics of the first surviving seed
};

// Full-batch transductive training with early stopping on validation
// accuracy and best-epoch restore. Seeds beyond the first can run on
// worker threads (cfg.jobs); aggregation order is fixed by seed order.
RunResult train(const TrainConfig& cfg, const LabeledDataset& data);

// train() for one seed, also exposing the trained model for inspection.
SeedRun train_single(const TrainConfig& cfg, const LabeledDataset& data,
                     std::uint64_t seed, Model* out_model = nullptr,
                     EnergyTrace* out_trace = nullptr);

struct DepthRow {
    long depth = 0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::size_t failed = 0;
};

// Reruns training varying only the unroll length (total_time = depth * tau).
std::vector<DepthRow> depth_sweep(const TrainConfig& cfg,
                                  const LabeledDataset& data,
                                  const std::vector<long>& depths);
std::string depth_sweep_csv(const std::vector<DepthRow>& rows);

struct AblationRow {
    bool repulsion = false;
    bool allen_cahn = false;
    bool noise = false;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::size_t failed = 0;
};

// Trains every on/off combination of the requested toggles (subset of
// {"repulsion", "allen_cahn", "noise"}); unlisted toggles stay at their
// config value.
std::vector<AblationRow> ablate(const TrainConfig& cfg, const LabeledDataset& data,
                                const std::vector<std::string>& toggles);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct ProbeRow {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t incidences = 0; // tr(D_v) + tr(D_e)
    double seconds_per_step = 0.0;
};

struct ProbeOptions {
    std::size_t hidden_dim = 32;
    long steps = 24;
    int repeats = 5;
    std::uint64_t seed = 7;
};

// Times the learned first-order pipeline forward per step across instance
// scales. Differences two unroll lengths to cancel fixed overhead.
std::vector<ProbeRow> complexity_probe(const std::vector<SynthSpec>& sizes,
                                       const ProbeOptions& opt);
std::string probe_csv(const std::vector<ProbeRow>& rows);

// Least-squares slope of log(seconds) vs log(incidences).
double probe_loglog_slope(const std::vector<ProbeRow>& rows);

std::string run_result_json(const TrainConfig& cfg, const RunResult& r);

} // namespace hamp

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spsnn/objectives.hpp"
#include "spsnn/simulator.hpp"

namespace spsnn::train {

struct AdamConfig {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct AdamState {
    sim::ParamSet m, v;
    long t = 0;
    static AdamState zeros_like(const sim::ParamSet& p) {
        return {sim::ParamSet::zeros_like(p), sim::ParamSet::zeros_like(p), 0};
    }
};

// Standard Adam with bias correction. Throws SimError naming the offending
// block and index when a gradient is non-finite.
void adam_step(sim::ParamSet& p, const sim::ParamSet& g, AdamState& st, const AdamConfig& cfg,
               double lr);

struct ScheduleConfig {
    double peak_lr = 1e-3;
    long warmup_steps = 500;
    long total_steps = 10000;
    double final_fraction = 0.1;
};

// Linear warmup 0 -> peak over warmup_steps, cosine decay to final_fraction*peak
// at total_steps, constant afterwards. Steps are 1-based update indices.
double lr_schedule(const ScheduleConfig& s, long step);

enum class SparsityMode { none, dynamic_prune, static_prune };

struct SparsityPolicy {
    SparsityMode mode = SparsityMode::none;
    double sp = 0.0;  // fraction in [0,1]
};

// Global magnitude pruning across the synaptic weight matrices (w1 and w2);
// positions, delays and readout are never pruned. Ties at the threshold are
// all zeroed, so the resulting zero fraction is >= sp.
void magnitude_prune(sim::ParamSet& p, double sp);

double weight_sparsity(const sim::ParamSet& p);

enum class Task { yinyang, spikefile };

struct TrainConfig {
    sim::NetworkConfig net;
    objectives::TtfsLossParams ttfs;
    sim::InitSpec init;
    AdamConfig adam;
    ScheduleConfig sched;
    SparsityPolicy sparsity;
    int epochs = 300;
    int batch_size = 150;
    bool lr_halving_retry = true;

    Task task = Task::yinyang;
    int n_train = 5000, n_test = 1000;
    double t_window = 10.0;        // ms, yin-yang encoding window
    std::uint64_t data_seed = 12345;
    std::string train_path, test_path;  // spikefile task
};

struct DataSplit {
    std::vector<sim::Sample> train, test;
};

DataSplit load_data(const TrainConfig& cfg);

struct EpochRow {
    int epoch = 0;
    std::string split;
    double loss = 0, accuracy = 0, lr = 0, sparsity = 0;
    long param_count = 0, clamp_count = 0, silent_count = 0;
};

void write_metrics_csv(const std::string& path, const std::vector<EpochRow>& rows);

struct TrainResult {
    std::vector<EpochRow> rows;
    sim::ParamSet model;
    double final_test_acc = 0, final_test_loss = 0;
    int capacity = 0;
    long halvings = 0;
};

TrainResult train_run(const TrainConfig& cfg, std::uint64_t seed);

struct EvalResult {
    double accuracy = 0, loss = 0;
    long silent = 0;
    double sparsity = 0;
};

EvalResult evaluate(const sim::NetworkConfig& net, const objectives::TtfsLossParams& ttfs,
                    const sim::ParamSet& p, const std::vector<sim::Sample>& samples,
                    int capacity = 0);

struct Aggregate {
    double median = 0, q1 = 0, q3 = 0;
};

Aggregate aggregate(std::vector<double> values);

struct ExperimentResult {
    std::vector<TrainResult> runs;
    Aggregate test_acc;
    long params = 0;
};

// Median and IQR of final test accuracy over seeds. jobs > 1 runs seeds in
// parallel threads; results are independent of the job count.
ExperimentResult run_experiment(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                int jobs = 1);

}  // namespace spsnn::train

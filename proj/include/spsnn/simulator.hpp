#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spsnn/common.hpp"
#include "spsnn/geometry.hpp"
#include "spsnn/gradcore.hpp"
#include "spsnn/neurons.hpp"
#include "spsnn/objectives.hpp"

namespace spsnn::sim {

enum class Topology { feedforward, recurrent };

// spatial: delays from neuron positions; fixed: one-step delays, weights-only
// baseline (the 0-dim endpoint); free_delays: one trainable delay per synapse
// (the infinite-dim endpoint).
enum class DelayMode { spatial, fixed, free_delays };

struct NetworkConfig {
    Topology topology = Topology::feedforward;
    NeuronModel model = NeuronModel::lif;
    int n_in = 5, n_hidden = 30, n_out = 3;
    int dimension = 2;
    DelayMode delay_mode = DelayMode::spatial;
    bool tortuous = false;
    double epsilon = 0.0;
    double dt = 0.1;      // ms
    double t_end = 30.0;  // ms
    int checkpoint_interval = 100;
    double scale_factor = 1.0;
    NeuronParams neuron;
    bool one_spike = true;
    double bias_hidden = 0.0, bias_out = 0.0;
    // Reset-rule variants. dvdt_plus_at_reset evaluates [v'+] at the post-reset
    // voltage (the leak term vanishes there); the alternative keeps the
    // pre-reset leak. reset_tangent=false zeroes the tangent through resets
    // (ablation: what a naive autodiff of the discrete program would do).
    bool dvdt_plus_at_reset = true;
    bool reset_tangent = true;

    bool feedforward() const { return topology == Topology::feedforward; }
    int n_steps() const { return static_cast<int>(t_end / dt + 0.5); }
    int n_spiking() const { return n_hidden + (feedforward() ? n_out : 0); }
    int n_positioned() const { return n_in + n_spiking(); }
    int n_targets() const { return feedforward() ? n_out : n_hidden; }
    void validate() const;
};

// All trainable blocks. Blocks not used by the configured mode stay empty.
struct ParamSet {
    Mat w1;          // n_in x n_hidden
    Mat w2;          // feedforward: n_hidden x n_out; recurrent: n_hidden x n_hidden
    Mat positions;   // n_positioned x dimension (spatial mode)
    Mat tortuosity;  // n_positioned x n_positioned (tortuous mode)
    Mat free1, free2;  // per-synapse delays [ms] (free-delay mode)
    Mat readout;     // n_out x n_hidden (recurrent mode)

    template <typename F>
    void for_each_block(F&& f) {
        f("w1", w1); f("w2", w2); f("positions", positions); f("tortuosity", tortuosity);
        f("free1", free1); f("free2", free2); f("readout", readout);
    }
    template <typename F>
    void for_each_block(F&& f) const {
        f("w1", w1); f("w2", w2); f("positions", positions); f("tortuosity", tortuosity);
        f("free1", free1); f("free2", free2); f("readout", readout);
    }

    static ParamSet zeros_like(const ParamSet& p);
    std::size_t total_size() const;
};

struct InitSpec {
    double w1_mean = 0.5, w1_std = 0.5;
    double w2_mean = 0.2, w2_std = 0.3;
    double readout_std = 0.1;
    double pos_std = 1.0;
};

ParamSet init_params(const NetworkConfig& cfg, std::uint64_t seed, const InitSpec& init);

// Trainable parameter count per block, honoring the configured mode.
long param_count(const NetworkConfig& cfg);

struct InputEvent {
    int neuron;
    double t;  // ms
};

struct Sample {
    std::vector<InputEvent> events;  // nondecreasing in t
    int label = 0;
};

// Delay matrices resolved against the current positions (or free delays),
// quantized to arrival-step offsets. Queue capacity is fixed per run; step
// entries that would exceed it are clamped and counted.
struct PreparedNet {
    int capacity = 0;
    long clamp_count = 0;
    Mat delays1, delays2;            // ms, per synapse
    std::vector<int> steps1, steps2; // arrival offsets, >= 1
};

int derive_capacity(const NetworkConfig& cfg, const ParamSet& p);
PreparedNet prepare(const NetworkConfig& cfg, const ParamSet& p, int capacity = 0);

geometry::SpatialEmbedding embedding_of(const NetworkConfig& cfg, const ParamSet& p);

struct SpikeRec {
    int neuron;        // spiking-neuron index
    int step;
    double ratio;      // [v'+]/max([v'-], guard) at the crossing
    double inv_slope;  // 1/max([v'-], guard)
};

struct SimTrace {
    std::vector<SpikeRec> raster;
    std::vector<double> out_times;  // feedforward: first spike per output, sentinel t_end
    std::vector<double> counts;     // recurrent: spike count per hidden neuron
    gradcore::Counters counters;
    bool silent = false;

    long total_spikes() const { return static_cast<long>(raster.size()); }
};

// Accumulator for reverse-mode results over a batch. lambda_delay collects the
// adjoint of the full delay matrix; finalize_gradients folds it onto positions
// (and tortuosity) once per batch.
struct GradSink {
    ParamSet g;
    Mat lambda_delay;  // n_positioned x n_positioned, spatial modes only
    double loss_sum = 0.0;
    long n_samples = 0;
    long n_correct = 0;
    long n_silent = 0;
    gradcore::Counters counters;

    static GradSink zeros_like(const NetworkConfig& cfg, const ParamSet& p);
};

struct JvpResult {
    double loss = 0.0;
    double loss_tangent = 0.0;
};

// Diagnostic hook: membrane state of one neuron at the start of `step`
// (step == n_steps reads the final state), with its directional tangent.
struct VoltageProbe {
    double v = 0.0;
    double tangent = 0.0;
};

// Reusable engine: allocates state once for a given config + capacity.
class Simulator {
  public:
    Simulator(const NetworkConfig& cfg, int capacity);

    // Time-stepped primal simulation; throws SimError on non-finite state.
    const SimTrace& forward(const PreparedNet& net, const ParamSet& p, const Sample& s);

    // Primal + loss + parameter gradients accumulated into the sink.
    // Identical primal trajectory to forward().
    void reverse(const PreparedNet& net, const ParamSet& p, const Sample& s,
                 const objectives::TtfsLossParams& loss, GradSink& sink);

    // Primal + directional derivative of the loss along `dir` (JVP semantics).
    JvpResult jvp(const PreparedNet& net, const ParamSet& p, const ParamSet& dir,
                  const Sample& s, const objectives::TtfsLossParams& loss);

    // Forward run capturing one neuron's voltage and, when dir != nullptr, its
    // tangent along dir.
    VoltageProbe probe_voltage(const PreparedNet& net, const ParamSet& p, const ParamSet* dir,
                               const Sample& s, int step, int neuron);

    const NetworkConfig& config() const { return cfg_; }
    const SimTrace& last_trace() const { return trace_; }

  private:
    template <bool kTan>
    void forward_pass(const PreparedNet& net, const ParamSet& p, const Sample& s,
                      const ParamSet* dir, const Mat* dtan1, const Mat* dtan2);
    void reverse_pass(const PreparedNet& net, const ParamSet& p, const Sample& s,
                      const objectives::TtfsLossParams& loss, GradSink& sink);

    NetworkConfig cfg_;
    int T_, M_, C_;
    bool needs_recompute_;

    std::vector<double> v_, i_, ia_;
    std::vector<std::uint8_t> spiked_;
    std::vector<gradcore::SpikeQueue> queues_;
    // forward tangent state
    std::vector<double> tv_, ti_, tia_, out_tan_, count_tan_;
    // reverse state
    std::vector<double> lv_, li_, lia_;
    std::vector<double> ring_i_, ring_v_, ring_a_;
    std::vector<std::uint8_t> spike_flag_;
    // checkpoints + segment recompute buffers
    std::vector<std::vector<double>> ckpt_v_, ckpt_i_, ckpt_ia_;
    std::vector<double> buf_v_;
    std::vector<std::uint8_t> buf_flag_;

    std::vector<int> out_step_;
    SimTrace trace_;
    bool want_tape_ = false;
    int probe_step_ = -1, probe_neuron_ = -1;
    VoltageProbe probe_;
};

// Convenience wrappers (allocate per call; tests and small runs).
SimTrace run_forward(const NetworkConfig& cfg, const PreparedNet& net, const ParamSet& p,
                     const Sample& s);
double trace_loss(const NetworkConfig& cfg, const objectives::TtfsLossParams& lp,
                  const ParamSet& p, const SimTrace& trace, int label,
                  std::vector<double>* dl_dt = nullptr);
int classify(const NetworkConfig& cfg, const ParamSet& p, const SimTrace& trace,
             bool* silent = nullptr);
void finalize_gradients(const NetworkConfig& cfg, const ParamSet& p, GradSink& sink);

}  // namespace spsnn::sim

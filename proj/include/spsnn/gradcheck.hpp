#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spsnn/objectives.hpp"
#include "spsnn/simulator.hpp"

namespace spsnn::gradcheck {

struct Options {
    double h = 1e-4;             // central-difference step
    double rel_floor_frac = 1e-3;  // error floor relative to the block's largest gradient
};

struct BlockReport {
    std::string name;
    double rel = 0.0;        // block relative error |fd - eng| / max(|fd|, |eng|), vector norms
    double max_entry_rel = 0.0;  // worst per-entry relative error (floored denominator)
    std::size_t checked = 0;
    std::size_t excluded = 0;  // spike pattern changed inside the +-h bracket
    std::size_t worst_index = 0;
    double worst_eng = 0.0, worst_fd = 0.0;
};

struct Report {
    std::vector<BlockReport> blocks;
    double max_rel = 0.0;        // max over blocks of the block relative error
    double max_entry_rel = 0.0;
    long grazing = 0;

    bool pass(double tol) const { return max_rel < tol; }
    std::string to_string() const;
};

// Engine reverse-mode gradients versus central finite differences of the total
// batch loss. Parameters whose perturbed runs change the spike pattern (an
// event appearing or vanishing inside the bracket, which a central difference
// cannot attribute) are excluded and counted.
Report finite_difference_check(const sim::NetworkConfig& cfg, const sim::ParamSet& params,
                               const std::vector<sim::Sample>& batch,
                               const objectives::TtfsLossParams& loss, const Options& opt);

// Total batch loss at the given parameters (shared by tests).
double batch_loss(const sim::NetworkConfig& cfg, const sim::ParamSet& params,
                  const std::vector<sim::Sample>& batch,
                  const objectives::TtfsLossParams& loss, int capacity,
                  std::uint64_t* pattern_hash = nullptr);

// Engine gradient of the total batch loss.
sim::GradSink batch_gradient(const sim::NetworkConfig& cfg, const sim::ParamSet& params,
                             const std::vector<sim::Sample>& batch,
                             const objectives::TtfsLossParams& loss, int capacity);

// Small tuned network for the gradient-exactness checks: 3 inputs, 5 hidden,
// 3 outputs, random positions and weights in a regime with robust, non-grazing
// threshold crossings.
struct Toy {
    sim::NetworkConfig cfg;
    sim::ParamSet params;
    std::vector<sim::Sample> batch;
    objectives::TtfsLossParams loss;
};

Toy make_toy(NeuronModel model, sim::DelayMode mode, std::uint64_t seed, int batch = 8);

// Randomized batch of input spike trains for gradcheck runs.
std::vector<sim::Sample> random_batch(const sim::NetworkConfig& cfg, int batch,
                                      double input_window, int events_per_input,
                                      std::uint64_t seed);

}  // namespace spsnn::gradcheck

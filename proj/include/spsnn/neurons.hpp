#pragma once

#include <cmath>

#include "spsnn/common.hpp"

namespace spsnn {

enum class NeuronModel { lif, adex };

// Threshold is fixed at 1 and reset at 0; the dynamics are written in those units.
struct NeuronParams {
    double tau_mem = 20.0;   // ms
    double tau_syn = 5.0;    // ms
    double tau_adapt = 50.0; // ms, AdEx only
    double adapt_a = 0.0;    // subthreshold adaptation coupling
    double adapt_b = 0.0;    // spike-triggered adaptation increment
    double delta_t = 0.2;    // AdEx sharpness, threshold units

    static constexpr double v_threshold = 1.0;
    static constexpr double v_reset_value = 0.0;

    void validate() const {
        if (!(tau_mem > 0.0 && tau_syn > 0.0 && tau_adapt > 0.0))
            throw ConfigError("neuron time constants must be positive");
        if (!(delta_t > 0.0)) throw ConfigError("delta_t must be positive");
    }
};

// Jump contributions delivered by the spike queue for one timestep.
struct StepJumps {
    double i_jump = 0.0;
    double v_jump = 0.0;       // identically zero in primal space
    double i_adapt_jump = 0.0; // AdEx only
};

// No-reset next state plus the bracketed crossing slopes [v'-] and [v'+].
// The slopes are only consumed by the reset rule; they never update state.
struct StepResult {
    double v_noreset_next = 0.0;
    double i_next = 0.0;
    double i_adapt_next = 0.0;
    double dvdt_minus = 0.0;
    double dvdt_plus = 0.0;
    bool flagged = false; // AdEx voltage cap hit
};

// AdEx guards: exponential argument clip and voltage cap (the upswing is unbounded).
inline constexpr double kAdexExpClip = 20.0;
inline constexpr double kAdexVoltageCap = 1e3;

// Exact exponential leak for v and i_syn, forward-Euler coupling of i_syn into v:
//   v_next    = exp(-dt/tau_mem) * v + (i_syn + bias) * dt + v_jump
//   i_next    = exp(-dt/tau_syn) * i_syn + i_jump
//   [v'-]     = i_syn + bias - v/tau_mem
//   [v'+]     = i_syn + i_jump + bias - v_plus/tau_mem, v_plus = 0 after the reset
// `plus_at_reset` selects where [v'+] is evaluated: at the reset value (default)
// or at the pre-reset voltage.
inline StepResult lif_step_pre(double v, double i_syn, double bias, double alpha_mem,
                               double alpha_syn, double inv_tau_mem, double dt,
                               const StepJumps& j, bool plus_at_reset = true) {
    StepResult r;
    r.v_noreset_next = alpha_mem * v + (i_syn + bias) * dt + j.v_jump;
    r.i_next = alpha_syn * i_syn + j.i_jump;
    r.dvdt_minus = i_syn + bias - v * inv_tau_mem;
    r.dvdt_plus = i_syn + j.i_jump + bias - (plus_at_reset ? 0.0 : v) * inv_tau_mem;
    return r;
}

inline StepResult lif_step(double v, double i_syn, const NeuronParams& p, double dt,
                           const StepJumps& j, double bias = 0.0, bool plus_at_reset = true) {
    return lif_step_pre(v, i_syn, bias, std::exp(-dt / p.tau_mem), std::exp(-dt / p.tau_syn),
                        1.0 / p.tau_mem, dt, j, plus_at_reset);
}

// AdEx voltage right-hand side; exponent clipped before exp.
inline double adex_dvdt(double v, double i_syn, double i_adapt, double bias,
                        const NeuronParams& p) {
    double x = (v - 0.5) / p.delta_t;
    double e = std::exp(x < kAdexExpClip ? x : kAdexExpClip);
    return (-v + p.delta_t * e) / p.tau_mem + i_syn + bias - i_adapt;
}

// d/dv of adex_dvdt, zero through the exponent clip.
inline double adex_dvdt_dv(double v, const NeuronParams& p) {
    double x = (v - 0.5) / p.delta_t;
    double e = x < kAdexExpClip ? std::exp(x) : 0.0;
    return (-1.0 + e) / p.tau_mem;
}

// Forward Euler for v and i_adapt, exponential decay for i_syn as in lif_step.
inline StepResult adex_step_pre(double v, double i_syn, double i_adapt, double bias,
                                double alpha_syn, double dt, const NeuronParams& p,
                                const StepJumps& j, bool plus_at_reset = true) {
    StepResult r;
    r.dvdt_minus = adex_dvdt(v, i_syn, i_adapt, bias, p);
    r.v_noreset_next = v + dt * r.dvdt_minus + j.v_jump;
    if (!(std::abs(r.v_noreset_next) <= kAdexVoltageCap)) {
        r.v_noreset_next = r.v_noreset_next > 0.0 ? kAdexVoltageCap : -kAdexVoltageCap;
        r.flagged = true;
    }
    r.i_next = alpha_syn * i_syn + j.i_jump;
    r.i_adapt_next = i_adapt + dt * (-i_adapt + p.adapt_a * v) / p.tau_adapt + j.i_adapt_jump;
    r.dvdt_plus = adex_dvdt(plus_at_reset ? 0.0 : v, i_syn + j.i_jump, i_adapt, bias, p);
    return r;
}

inline StepResult adex_step(double v, double i_syn, double i_adapt, const NeuronParams& p,
                            double dt, const StepJumps& j, double bias = 0.0,
                            bool plus_at_reset = true) {
    return adex_step_pre(v, i_syn, i_adapt, bias, std::exp(-dt / p.tau_syn), dt, p, j,
                         plus_at_reset);
}

// S = 1 iff v >= 1; a neuron that already fired emits nothing more in one-spike mode.
inline int threshold(double v, bool has_spiked = false, bool one_spike_mode = false) {
    if (one_spike_mode && has_spiked) return 0;
    return v >= NeuronParams::v_threshold ? 1 : 0;
}

}  // namespace spsnn

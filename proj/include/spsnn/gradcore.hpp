#pragma once

#include <algorithm>
#include <vector>

#include "spsnn/common.hpp"
#include "spsnn/neurons.hpp"

namespace spsnn::gradcore {

// Floor on crossing slopes (v-dot units, 1/ms). A detected crossing with a
// slope below this is a grazing spike: the guarded value is used and counted.
inline constexpr double kSlopeGuard = 1e-3;

struct Counters {
    long grazing = 0;         // slope guard engaged at a crossing
    long clamped = 0;         // arrivals delivered at the last queue slot
    long flagged_steps = 0;   // AdEx voltage cap hits
};

// Guarded denominator for the spike-time and reset rules.
inline double guarded_slope(double dvdt_minus, Counters* c) {
    if (dvdt_minus < kSlopeGuard) {
        if (c) ++c->grazing;
        return kSlopeGuard;
    }
    return dvdt_minus;
}

// T[t_post] = -T[v_pre] / max(v'_pre, guard) + T[delay].
// Input neurons have static spike times: pass v_tangent = 0.
inline double spike_time_tangent(double v_tangent, double dvdt_pre, double delay_tangent,
                                 Counters* c = nullptr) {
    return -v_tangent / guarded_slope(dvdt_pre, c) + delay_tangent;
}

// Reset ratio [v'+]/[v'-], denominator guarded.
inline double reset_ratio(double dvdt_plus, double dvdt_minus, Counters* c = nullptr) {
    return dvdt_plus / guarded_slope(dvdt_minus, c);
}

// v_reset: primal selects 0 or the no-reset value; the tangent is lifted over
// the discontinuity with the slope ratio instead of being zeroed.
inline double v_reset(int S, double v_noreset_next) {
    return S ? NeuronParams::v_reset_value : v_noreset_next;
}

inline double v_reset_tangent(int S, double ratio, double v_tangent,
                              double v_noreset_tangent) {
    return S ? ratio * v_tangent : v_noreset_tangent;
}

// Per-neuron ring buffer of pending jump contributions, addressed by absolute
// timestep. Slots are additive and cleared on dequeue. The optional tangent
// arrays mirror the primal slots (v_jump is always zero in primal space but its
// tangent is not).
class SpikeQueue {
  public:
    SpikeQueue() = default;
    SpikeQueue(int capacity, bool with_tangent) { reset(capacity, with_tangent); }

    void reset(int capacity, bool with_tangent) {
        cap_ = capacity;
        ij_.assign(cap_, 0.0);
        vj_.assign(cap_, 0.0);
        aj_.assign(cap_, 0.0);
        if (with_tangent) {
            tij_.assign(cap_, 0.0);
            tvj_.assign(cap_, 0.0);
            taj_.assign(cap_, 0.0);
        } else {
            tij_.clear();
            tvj_.clear();
            taj_.clear();
        }
    }

    int capacity() const { return cap_; }
    bool has_tangent() const { return !tij_.empty(); }

    // Clamp an arrival into the addressable window [now+1, now+cap-1].
    int clamp_arrival(int now, int arrival, Counters* c) const {
        if (arrival > now + cap_ - 1) {
            if (c) ++c->clamped;
            return now + cap_ - 1;
        }
        return std::max(arrival, now + 1);
    }

    void add_primal(int slot_step, double i_jump, double v_jump, double ia_jump) {
        int s = slot_step % cap_;
        ij_[s] += i_jump;
        vj_[s] += v_jump;
        aj_[s] += ia_jump;
    }

    void add_tangent(int slot_step, double ti, double tv, double ta) {
        int s = slot_step % cap_;
        tij_[s] += ti;
        tvj_[s] += tv;
        taj_[s] += ta;
    }

    // Returns accumulated jumps for `step` and clears the slot for reuse.
    StepJumps dequeue(int step) {
        int s = step % cap_;
        StepJumps j{ij_[s], vj_[s], aj_[s]};
        ij_[s] = vj_[s] = aj_[s] = 0.0;
        return j;
    }

    StepJumps dequeue_tangent(int step) {
        int s = step % cap_;
        StepJumps j{tij_[s], tvj_[s], taj_[s]};
        tij_[s] = tvj_[s] = taj_[s] = 0.0;
        return j;
    }

  private:
    int cap_ = 0;
    std::vector<double> ij_, vj_, aj_;
    std::vector<double> tij_, tvj_, taj_;
};

// Synaptic arrival of a spike with weight w at `arrival`:
//   i_jump += w            T[i_jump] += T[w] + (w/tau_syn) T[t_post]
//   v_jump += 0            T[v_jump] += -w T[t_post]
// The v_jump tangent carries the arrival-time sensitivity of the voltage; the
// pair of injections reproduces the exact PSP sensitivity to the arrival time.
inline void enqueue_spike(SpikeQueue& q, int now, int arrival, double w, double w_tangent,
                          double t_post_tangent, double tau_syn, Counters* c = nullptr) {
    int slot = q.clamp_arrival(now, arrival, c);
    q.add_primal(slot, w, 0.0, 0.0);
    if (q.has_tangent())
        q.add_tangent(slot, w_tangent + (w / tau_syn) * t_post_tangent,
                      -w * t_post_tangent, 0.0);
}

// Spike-triggered adaptation increment on the emitting neuron itself,
// delivered at the earliest reachable slot:
//   i_adapt_jump += b      T[i_adapt_jump] += (b/tau_adapt) T[t_pre]
inline void enqueue_adaptation(SpikeQueue& q, int now, double b, double t_pre_tangent,
                               double tau_adapt, Counters* c = nullptr) {
    int slot = q.clamp_arrival(now, now + 1, c);
    q.add_primal(slot, 0.0, 0.0, b);
    if (q.has_tangent()) q.add_tangent(slot, 0.0, 0.0, (b / tau_adapt) * t_pre_tangent);
}

}  // namespace spsnn::gradcore

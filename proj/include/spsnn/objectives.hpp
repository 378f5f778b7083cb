#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "spsnn/common.hpp"

namespace spsnn::objectives {

struct TtfsLossParams {
    double beta = 1.0;   // slope, 1/ms
    double margin = 1.0; // ms

    void validate() const {
        if (!(beta > 0.0)) throw ConfigError("ttfs beta must be positive");
        if (!(margin >= 0.0)) throw ConfigError("ttfs margin must be nonnegative");
    }
};

// log(1 + e^z), stable for large |z|
inline double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

inline double logistic(double z) {
    if (z >= 0.0) {
        double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

// L = sum_{k != correct} softplus(beta (t_correct - t_k + margin)).
// dl_dt, when given, receives dL/dt_k for every k (including the correct one).
inline double ttfs_hinge(const std::vector<double>& times, std::size_t correct,
                         const TtfsLossParams& p, std::vector<double>* dl_dt = nullptr) {
    double loss = 0.0;
    if (dl_dt) dl_dt->assign(times.size(), 0.0);
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (k == correct) continue;
        double z = p.beta * (times[correct] - times[k] + p.margin);
        loss += softplus(z);
        if (dl_dt) {
            double s = p.beta * logistic(z);
            (*dl_dt)[correct] += s;
            (*dl_dt)[k] -= s;
        }
    }
    return loss;
}

// Superspike: step-function primal with surrogate derivative 1/(|x|+1)^2.
inline int superspike_primal(double x) { return x >= 0.0 ? 1 : 0; }

inline double superspike_surrogate(double x) {
    double d = std::abs(x) + 1.0;
    return 1.0 / (d * d);
}

// Softmax cross-entropy over readout logits W s. Gradients are optional:
// d_readout accumulates dL/dW, d_counts receives dL/ds.
inline double readout_ce(const std::vector<double>& counts, const Mat& readout,
                         std::size_t label, Mat* d_readout = nullptr,
                         std::vector<double>* d_counts = nullptr) {
    std::size_t n_out = readout.rows, n_h = readout.cols;
    std::vector<double> logits(n_out, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
        double z = 0.0;
        for (std::size_t h = 0; h < n_h; ++h) z += readout(o, h) * counts[h];
        logits[o] = z;
    }
    double zmax = logits[0];
    for (double z : logits) zmax = std::max(zmax, z);
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - zmax);
    double logdenom = std::log(denom) + zmax;
    double loss = logdenom - logits[label];

    if (d_readout || d_counts) {
        if (d_counts) d_counts->assign(n_h, 0.0);
        for (std::size_t o = 0; o < n_out; ++o) {
            double p = std::exp(logits[o] - logdenom);
            double g = p - (o == label ? 1.0 : 0.0);
            for (std::size_t h = 0; h < n_h; ++h) {
                if (d_readout) (*d_readout)(o, h) += g * counts[h];
                if (d_counts) (*d_counts)[h] += g * readout(o, h);
            }
        }
    }
    return loss;
}

// argmax with deterministic lowest-index tie breaking
inline std::size_t argmax_tie_low(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] > v[best]) best = k;
    return best;
}

// argmin with deterministic lowest-index tie breaking
inline std::size_t argmin_tie_low(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] < v[best]) best = k;
    return best;
}

}  // namespace spsnn::objectives

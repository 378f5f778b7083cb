#pragma once

#include <vector>

#include "spsnn/common.hpp"

namespace spsnn::geometry {

// Norm floor used only for derivatives: coincident positions make the distance
// non-differentiable, so the unit vector is computed against max(|dr|, kNormFloor)
// while the primal delay is left untouched.
inline constexpr double kNormFloor = 1e-9;

// Per-neuron coordinates plus the distance-to-delay conversion. Coordinates are
// dimensionless; delays come out in simulation time units (ms) after `scale`.
struct SpatialEmbedding {
    Mat positions;   // n x d
    double scale = 1.0;
    Mat tortuosity;  // optional n x n matrix E; empty when unused
    double epsilon = 0.0;

    std::size_t size() const { return positions.rows; }
    std::size_t dim() const { return positions.cols; }
};

struct DelayMatrix {
    Mat delays;             // n x n, ms; zero diagonal in Euclidean mode
    std::vector<int> steps; // n x n arrival offsets in timesteps, each >= 1
    long clamped = 0;       // step entries clamped to capacity-1
    std::size_t n = 0;

    int step(std::size_t i, std::size_t j) const { return steps[i * n + j]; }
};

// d_ij = scale * |r_i - r_j|_2
DelayMatrix euclidean_delays(const SpatialEmbedding& e);

// d_ij = 1/2 (1 + epsilon * tanh(E_ij)) * scale * |r_i - r_j|_2
DelayMatrix tortuous_delays(const SpatialEmbedding& e);

// Round-half-up quantization of one delay with a minimum latency of one step.
// capacity <= 0 skips the clamp.
int quantize_delay(double d, double dt, int capacity, long* clamped);

// steps_ij = clamp(max(1, round_half_up(d_ij / dt)), 1, capacity - 1).
// Clamping is counted in dm.clamped, never fatal. capacity <= 0 skips the clamp.
void delay_to_steps(DelayMatrix& dm, double dt, int capacity);

// JVP: directional delay derivative for a position (and optional tortuosity)
// perturbation. Output is n x n, same convention as DelayMatrix::delays.
Mat delay_tangent(const SpatialEmbedding& e, const Mat& pos_tangent, const Mat* tort_tangent);

// VJP: fold an n x n delay adjoint back onto positions (and tortuosity).
// Accumulates into pos_grad (n x d) and, if non-null and tortuous, tort_grad.
void accumulate_position_grad(const SpatialEmbedding& e, const Mat& delay_grad,
                              Mat& pos_grad, Mat* tort_grad);

}  // namespace spsnn::geometry

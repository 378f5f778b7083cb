#include "spsnn/geometry.hpp"

#include <cmath>

namespace spsnn::geometry {

namespace {

void check_embedding(const SpatialEmbedding& e) {
    if (e.positions.rows == 0 || e.positions.cols == 0)
        throw ConfigError("geometry: empty position matrix");
    if (!(e.scale > 0.0)) throw ConfigError("geometry: scale must be positive");
    for (double x : e.positions.a)
        if (!std::isfinite(x)) throw ConfigError("geometry: non-finite position");
}

double pair_distance(const Mat& r, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < r.cols; ++k) {
        double d = r(i, k) - r(j, k);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

DelayMatrix euclidean_delays(const SpatialEmbedding& e) {
    check_embedding(e);
    std::size_t n = e.size();
    DelayMatrix dm;
    dm.n = n;
    dm.delays = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            dm.delays(i, j) = (i == j) ? 0.0 : e.scale * pair_distance(e.positions, i, j);
    return dm;
}

DelayMatrix tortuous_delays(const SpatialEmbedding& e) {
    check_embedding(e);
    if (e.tortuosity.rows != e.size() || e.tortuosity.cols != e.size())
        throw ConfigError("geometry: tortuosity matrix shape mismatch");
    if (!(e.epsilon >= 0.0 && e.epsilon < 1.0))
        throw ConfigError("geometry: epsilon must lie in [0,1)");
    std::size_t n = e.size();
    DelayMatrix dm;
    dm.n = n;
    dm.delays = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double dist = pair_distance(e.positions, i, j);
            double f = 0.5 * (1.0 + e.epsilon * std::tanh(e.tortuosity(i, j)));
            dm.delays(i, j) = f * e.scale * dist;
        }
    return dm;
}

int quantize_delay(double d, double dt, int capacity, long* clamped) {
    long s = static_cast<long>(std::floor(d / dt + 0.5));
    if (s < 1) s = 1;
    if (capacity > 0 && s > capacity - 1) {
        s = capacity - 1;
        if (clamped) ++*clamped;
    }
    return static_cast<int>(s);
}

void delay_to_steps(DelayMatrix& dm, double dt, int capacity) {
    if (!(dt > 0.0)) throw ConfigError("geometry: dt must be positive");
    std::size_t n = dm.n;
    dm.steps.assign(n * n, 1);
    dm.clamped = 0;
    for (std::size_t k = 0; k < n * n; ++k)
        dm.steps[k] = quantize_delay(dm.delays.a[k], dt, capacity, &dm.clamped);
}

Mat delay_tangent(const SpatialEmbedding& e, const Mat& pos_tangent, const Mat* tort_tangent) {
    std::size_t n = e.size(), d = e.dim();
    bool tortuous = !e.tortuosity.empty();
    Mat out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double dist = pair_distance(e.positions, i, j);
            double inv = 1.0 / std::max(dist, kNormFloor);
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k)
                dot += (e.positions(i, k) - e.positions(j, k)) *
                       (pos_tangent(i, k) - pos_tangent(j, k));
            double ddist = dot * inv;
            if (!tortuous) {
                out(i, j) = e.scale * ddist;
            } else {
                double th = std::tanh(e.tortuosity(i, j));
                double f = 0.5 * (1.0 + e.epsilon * th);
                out(i, j) = f * e.scale * ddist;
                if (tort_tangent)
                    out(i, j) += 0.5 * e.epsilon * (1.0 - th * th) * e.scale * dist *
                                 (*tort_tangent)(i, j);
            }
        }
    return out;
}

void accumulate_position_grad(const SpatialEmbedding& e, const Mat& delay_grad,
                              Mat& pos_grad, Mat* tort_grad) {
    std::size_t n = e.size(), d = e.dim();
    bool tortuous = !e.tortuosity.empty();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double g = delay_grad(i, j);
            if (g == 0.0 || i == j) continue;
            double dist = pair_distance(e.positions, i, j);
            double inv = 1.0 / std::max(dist, kNormFloor);
            double f = 1.0;
            if (tortuous) {
                double th = std::tanh(e.tortuosity(i, j));
                f = 0.5 * (1.0 + e.epsilon * th);
                if (tort_grad)
                    (*tort_grad)(i, j) += g * 0.5 * e.epsilon * (1.0 - th * th) * e.scale * dist;
            }
            double c = g * f * e.scale * inv;
            for (std::size_t k = 0; k < d; ++k) {
                double u = e.positions(i, k) - e.positions(j, k);
                pos_grad(i, k) += c * u;
                pos_grad(j, k) -= c * u;
            }
        }
}

}  // namespace spsnn::geometry

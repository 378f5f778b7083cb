#include <cmath>

#include "doctest.h"
#include "spsnn/geometry.hpp"
#include "spsnn/rng.hpp"

using namespace spsnn;
using namespace spsnn::geometry;

namespace {

SpatialEmbedding random_embedding(Rng& rng, std::size_t n, std::size_t d, double scale = 1.0) {
    SpatialEmbedding e;
    e.positions = Mat(n, d);
    for (double& x : e.positions.a) x = rng.normal();
    e.scale = scale;
    return e;
}

// independent per-pair oracle: plain sqrt of summed squares
double pair_oracle(const Mat& r, std::size_t i, std::size_t j, double scale) {
    double s = 0.0;
    for (std::size_t k = 0; k < r.cols; ++k) s += std::pow(r(i, k) - r(j, k), 2.0);
    return scale * std::sqrt(s);
}

}  // namespace

TEST_CASE("euclidean delays: pythagorean and identity") {
    SpatialEmbedding e;
    e.positions = Mat(2, 2);
    e.positions(1, 0) = 3.0;
    e.positions(1, 1) = 4.0;
    e.scale = 1.0;
    DelayMatrix dm = euclidean_delays(e);
    CHECK(dm.delays(0, 1) == doctest::Approx(5.0));
    CHECK(dm.delays(1, 0) == doctest::Approx(5.0));
    CHECK(dm.delays(0, 0) == 0.0);

    e.positions(1, 0) = 0.0;
    e.positions(1, 1) = 0.0;
    dm = euclidean_delays(e);
    CHECK(dm.delays(0, 1) == 0.0);
}

TEST_CASE("euclidean delays match the brute-force pairwise oracle") {
    Rng rng(42);
    SpatialEmbedding e = random_embedding(rng, 4, 3, 2.5);
    DelayMatrix dm = euclidean_delays(e);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(std::abs(dm.delays(i, j) - pair_oracle(e.positions, i, j, e.scale)) < 1e-12);
}

TEST_CASE("euclidean delays reject non-finite positions") {
    SpatialEmbedding e;
    e.positions = Mat(2, 2);
    e.positions(0, 0) = std::nan("");
    CHECK_THROWS_AS(euclidean_delays(e), ConfigError);
}

TEST_CASE("tortuous delays: limit values of the tanh factor") {
    SpatialEmbedding e;
    e.positions = Mat(2, 1);
    e.positions(1, 0) = 2.0;
    e.scale = 1.0;
    e.tortuosity = Mat(2, 2);
    e.epsilon = 0.999999999;

    // E = 0 -> half the straight-line distance
    DelayMatrix dm = tortuous_delays(e);
    CHECK(dm.delays(0, 1) == doctest::Approx(1.0));

    e.tortuosity(0, 1) = 40.0;  // tanh -> 1
    dm = tortuous_delays(e);
    CHECK(dm.delays(0, 1) == doctest::Approx(2.0));

    e.tortuosity(0, 1) = -40.0;  // tanh -> -1
    dm = tortuous_delays(e);
    CHECK(dm.delays(0, 1) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("tortuous delays reject epsilon outside [0,1)") {
    SpatialEmbedding e;
    e.positions = Mat(2, 1);
    e.tortuosity = Mat(2, 2);
    e.epsilon = 1.0;
    CHECK_THROWS_AS(tortuous_delays(e), ConfigError);
}

TEST_CASE("delay_to_steps: rounding, minimum latency, clamping") {
    DelayMatrix dm;
    dm.n = 2;
    dm.delays = Mat(2, 2);
    dm.delays(0, 1) = 5.0;
    delay_to_steps(dm, 1.0, 0);
    CHECK(dm.step(0, 1) == 5);
    CHECK(dm.step(0, 0) == 1);  // zero delay still takes one step
    CHECK(dm.step(1, 0) == 1);

    dm.delays(0, 1) = 10.0 * 64;
    delay_to_steps(dm, 1.0, 64);
    CHECK(dm.step(0, 1) == 63);
    CHECK(dm.clamped == 1);
}

TEST_CASE("geometry properties on random embeddings") {
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t n = 3 + rng.integer(5);
        std::size_t d = 1 + rng.integer(4);
        SpatialEmbedding e = random_embedding(rng, n, d, 0.5 + rng.uniform());
        DelayMatrix dm = euclidean_delays(e);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(dm.delays(i, j) >= 0.0);
                CHECK(dm.delays(i, j) == dm.delays(j, i));  // exact, same fp ops
                for (std::size_t k = 0; k < n; ++k)
                    CHECK(dm.delays(i, k) <= dm.delays(i, j) + dm.delays(j, k) + 1e-12);
            }
    }
}

TEST_CASE("tortuous delays stay within the epsilon band") {
    Rng rng(11);
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 4;
        SpatialEmbedding e = random_embedding(rng, n, 3, 1.0);
        e.epsilon = rng.uniform() * 0.95;
        e.tortuosity = Mat(n, n);
        for (double& x : e.tortuosity.a) x = 4.0 * rng.normal();
        DelayMatrix base = euclidean_delays(e);
        DelayMatrix tort = tortuous_delays(e);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double lo = 0.5 * (1.0 - e.epsilon) * base.delays(i, j);
                double hi = 0.5 * (1.0 + e.epsilon) * base.delays(i, j);
                CHECK(tort.delays(i, j) >= lo - 1e-12);
                CHECK(tort.delays(i, j) <= hi + 1e-12);
            }
    }
}

TEST_CASE("delay tangent matches central finite differences") {
    Rng rng(13);
    const double h = 1e-6;
    for (int rep = 0; rep < 50; ++rep) {
        SpatialEmbedding e = random_embedding(rng, 5, 2, 1.7);
        // keep pairs well separated so the norm floor is inactive
        for (std::size_t i = 0; i < 5; ++i) e.positions(i, 0) += 3.0 * static_cast<double>(i);

        Mat dir(5, 2);
        for (double& x : dir.a) x = rng.normal();

        Mat tan = delay_tangent(e, dir, nullptr);
        SpatialEmbedding ep = e, em = e;
        for (std::size_t k = 0; k < dir.size(); ++k) {
            ep.positions.a[k] = e.positions.a[k] + h * dir.a[k];
            em.positions.a[k] = e.positions.a[k] - h * dir.a[k];
        }
        DelayMatrix dp = euclidean_delays(ep), dm = euclidean_delays(em);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                if (i == j) continue;
                double fd = (dp.delays(i, j) - dm.delays(i, j)) / (2.0 * h);
                CHECK(std::abs(fd - tan(i, j)) <
                      1e-6 * std::max(1.0, std::abs(fd)));
            }
    }
}

TEST_CASE("position VJP agrees with the tangent (dot-product identity)") {
    Rng rng(17);
    SpatialEmbedding e = random_embedding(rng, 6, 3, 1.3);
    e.epsilon = 0.5;
    e.tortuosity = Mat(6, 6);
    for (double& x : e.tortuosity.a) x = rng.normal();

    Mat pos_dir(6, 3), tort_dir(6, 6), dl(6, 6);
    for (double& x : pos_dir.a) x = rng.normal();
    for (double& x : tort_dir.a) x = rng.normal();
    for (double& x : dl.a) x = rng.normal();

    Mat jvp = delay_tangent(e, pos_dir, &tort_dir);
    double lhs = 0.0;
    for (std::size_t k = 0; k < jvp.size(); ++k) lhs += jvp.a[k] * dl.a[k];

    Mat pos_grad(6, 3), tort_grad(6, 6);
    accumulate_position_grad(e, dl, pos_grad, &tort_grad);
    double rhs = 0.0;
    for (std::size_t k = 0; k < pos_grad.size(); ++k) rhs += pos_grad.a[k] * pos_dir.a[k];
    for (std::size_t k = 0; k < tort_grad.size(); ++k) rhs += tort_grad.a[k] * tort_dir.a[k];

    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

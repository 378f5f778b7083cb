#include <cmath>

#include "doctest.h"
#include "spsnn/neurons.hpp"
#include "spsnn/rng.hpp"

using namespace spsnn;

TEST_CASE("lif_step: zeros stay zero") {
    NeuronParams p;
    StepResult r = lif_step(0.0, 0.0, p, 1e-3, {});
    CHECK(r.v_noreset_next == 0.0);
    CHECK(r.i_next == 0.0);
    CHECK(r.dvdt_minus == 0.0);
    CHECK(r.dvdt_plus == 0.0);
}

TEST_CASE("lif_step: pure voltage decay over one membrane time constant") {
    NeuronParams p;
    StepResult r = lif_step(1.0, 0.0, p, p.tau_mem, {});
    CHECK(r.v_noreset_next == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("lif_step agrees with a fine-step forward-Euler oracle") {
    NeuronParams p;
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        double v = rng.uniform(-0.5, 1.0), is = rng.uniform(-0.2, 1.0);
        double dt = 1e-3;
        StepResult r = lif_step(v, is, p, dt, {});

        // 1000 sub-steps of forward Euler at dt=1e-6
        double ov = v, oi = is;
        double sub = dt / 1000.0;
        for (int k = 0; k < 1000; ++k) {
            double dv = -ov / p.tau_mem + oi;
            double di = -oi / p.tau_syn;
            ov += sub * dv;
            oi += sub * di;
        }
        CHECK(std::abs(r.v_noreset_next - ov) < 1e-4);
        CHECK(std::abs(r.i_next - oi) < 1e-4);
    }
}

TEST_CASE("lif_step: jump terms and crossing slopes") {
    NeuronParams p;
    StepJumps j{0.25, 0.0, 0.0};
    double v = 1.01, is = 0.4;
    StepResult r = lif_step(v, is, p, 1e-3, j);
    CHECK(r.dvdt_minus == doctest::Approx(is - v / p.tau_mem));
    // post-reset slope: leak vanishes at the reset value
    CHECK(r.dvdt_plus == doctest::Approx(is + j.i_jump));
    // the two slopes differ exactly by the jump terms
    StepResult r0 = lif_step(v, is, p, 1e-3, {});
    CHECK(r.dvdt_plus - r0.dvdt_plus == doctest::Approx(j.i_jump));

    // variant keeping the pre-reset leak in the plus slope
    StepResult rv = lif_step(v, is, p, 1e-3, j, 0.0, false);
    CHECK(rv.dvdt_plus == doctest::Approx(is + j.i_jump - v / p.tau_mem));
    CHECK(rv.dvdt_plus - rv.dvdt_minus == doctest::Approx(j.i_jump));
}

TEST_CASE("lif: zero-input decay is monotone toward zero") {
    NeuronParams p;
    double v = 0.9, is = 0.0;
    for (int k = 0; k < 50; ++k) {
        StepResult r = lif_step(v, is, p, 0.5, {});
        CHECK(r.v_noreset_next <= v);
        CHECK(r.v_noreset_next >= 0.0);
        v = r.v_noreset_next;
        is = r.i_next;
    }
    CHECK(v < 0.3);
}

TEST_CASE("adex_step: exponential term equals delta_t at v = 1/2") {
    NeuronParams p;
    p.delta_t = 0.17;
    // at v = 0.5 the rhs is (-v + delta_t)/tau_mem + i - ia
    double rhs = adex_dvdt(0.5, 0.0, 0.0, 0.0, p);
    CHECK(rhs == doctest::Approx((-0.5 + p.delta_t) / p.tau_mem));
}

TEST_CASE("adex_step: pure adaptation decay") {
    NeuronParams p;
    p.adapt_a = 0.0;
    p.adapt_b = 0.0;
    double dt = 1e-2;
    StepResult r = adex_step(0.0, 0.0, 1.0, p, dt, {});
    CHECK(r.i_adapt_next == doctest::Approx(1.0 - dt / p.tau_adapt));
}

TEST_CASE("adex_step agrees with a fine-step oracle") {
    NeuronParams p;
    p.adapt_a = 0.2;
    p.delta_t = 0.3;
    p.tau_adapt = 30.0;
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        double v = rng.uniform(-0.2, 0.9), is = rng.uniform(0.0, 0.6), ia = rng.uniform(0.0, 0.3);
        double dt = 1e-3;
        StepResult r = adex_step(v, is, ia, p, dt, {});

        double ov = v, oi = is, oa = ia;
        double sub = dt / 1000.0;
        for (int k = 0; k < 1000; ++k) {
            double dv = adex_dvdt(ov, oi, oa, 0.0, p);
            double di = -oi / p.tau_syn;
            double da = (-oa + p.adapt_a * ov) / p.tau_adapt;
            ov += sub * dv;
            oi += sub * di;
            oa += sub * da;
        }
        CHECK(std::abs(r.v_noreset_next - ov) < 1e-3);
        CHECK(std::abs(r.i_adapt_next - oa) < 1e-3);
    }
}

TEST_CASE("adex_step: divergence is capped and flagged") {
    NeuronParams p;
    p.delta_t = 0.05;
    StepResult r = adex_step(900.0, 0.0, 0.0, p, 10.0, {});
    CHECK(r.flagged);
    CHECK(std::abs(r.v_noreset_next) == kAdexVoltageCap);
}

TEST_CASE("threshold: boundary and one-spike mask") {
    CHECK(threshold(0.999) == 0);
    CHECK(threshold(1.0) == 1);
    CHECK(threshold(1.5, true, true) == 0);   // already spiked, one-spike mode
    CHECK(threshold(1.5, true, false) == 1);  // multi-spike mode ignores the mask
}

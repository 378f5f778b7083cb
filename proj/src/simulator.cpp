#include "spsnn/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "spsnn/rng.hpp"

namespace spsnn::sim {

void NetworkConfig::validate() const {
    if (n_in <= 0 || n_hidden <= 0 || n_out <= 0) throw ConfigError("neuron counts must be positive");
    if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("dt and t_end must be positive");
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
    if (delay_mode == DelayMode::spatial && dimension < 1)
        throw ConfigError("spatial mode needs dimension >= 1");
    if (tortuous && !(epsilon >= 0.0 && epsilon < 1.0))
        throw ConfigError("epsilon must lie in [0,1)");
    if (tortuous && delay_mode != DelayMode::spatial)
        throw ConfigError("tortuous delays require spatial mode");
    if (!(scale_factor > 0.0)) throw ConfigError("scale factor must be positive");
    neuron.validate();
}

ParamSet ParamSet::zeros_like(const ParamSet& p) {
    ParamSet z;
    z.w1 = Mat(p.w1.rows, p.w1.cols);
    z.w2 = Mat(p.w2.rows, p.w2.cols);
    z.positions = Mat(p.positions.rows, p.positions.cols);
    z.tortuosity = Mat(p.tortuosity.rows, p.tortuosity.cols);
    z.free1 = Mat(p.free1.rows, p.free1.cols);
    z.free2 = Mat(p.free2.rows, p.free2.cols);
    z.readout = Mat(p.readout.rows, p.readout.cols);
    return z;
}

std::size_t ParamSet::total_size() const {
    std::size_t n = 0;
    for_each_block([&](const char*, const Mat& m) { n += m.size(); });
    return n;
}

ParamSet init_params(const NetworkConfig& cfg, std::uint64_t seed, const InitSpec& init) {
    cfg.validate();
    int nh = cfg.n_hidden, ntgt = cfg.n_targets(), npos = cfg.n_positioned();
    ParamSet p;
    Rng rw1(Rng::derive(seed, 1)), rw2(Rng::derive(seed, 2)), rpos(Rng::derive(seed, 3));

    p.w1 = Mat(cfg.n_in, nh);
    for (double& w : p.w1.a) w = init.w1_mean + init.w1_std * rw1.normal();
    p.w2 = Mat(nh, ntgt);
    for (double& w : p.w2.a) w = init.w2_mean + init.w2_std * rw2.normal();

    // Positions are drawn even in free-delay mode so that the initial delay
    // distribution matches a spatial network with the same seed.
    int d = std::max(cfg.dimension, 2);
    Mat pos(npos, d);
    for (double& x : pos.a) x = init.pos_std * rpos.normal();

    if (cfg.delay_mode == DelayMode::spatial) {
        p.positions = Mat(npos, cfg.dimension);
        for (int i = 0; i < npos; ++i)
            for (int k = 0; k < cfg.dimension; ++k) p.positions(i, k) = pos(i, k);
        if (cfg.tortuous) p.tortuosity = Mat(npos, npos);
    } else if (cfg.delay_mode == DelayMode::free_delays) {
        geometry::SpatialEmbedding e{pos, cfg.scale_factor, {}, 0.0};
        geometry::DelayMatrix dm = geometry::euclidean_delays(e);
        p.free1 = Mat(cfg.n_in, nh);
        p.free2 = Mat(nh, ntgt);
        for (int k = 0; k < cfg.n_in; ++k)
            for (int h = 0; h < nh; ++h) p.free1(k, h) = dm.delays(k, cfg.n_in + h);
        for (int h = 0; h < nh; ++h)
            for (int m = 0; m < ntgt; ++m)
                p.free2(h, m) = dm.delays(cfg.n_in + h,
                                          cfg.feedforward() ? cfg.n_in + nh + m : cfg.n_in + m);
    }

    if (!cfg.feedforward()) {
        Rng rro(Rng::derive(seed, 4));
        p.readout = Mat(cfg.n_out, nh);
        for (double& w : p.readout.a) w = init.readout_std * rro.normal();
    }
    return p;
}

long param_count(const NetworkConfig& cfg) {
    long nh = cfg.n_hidden, ntgt = cfg.n_targets();
    long n = cfg.n_in * nh + nh * ntgt;  // synaptic weights
    switch (cfg.delay_mode) {
        case DelayMode::spatial:
            n += static_cast<long>(cfg.dimension) * cfg.n_positioned();
            if (cfg.tortuous) n += cfg.n_in * nh + nh * ntgt;
            break;
        case DelayMode::free_delays:
            n += cfg.n_in * nh + nh * ntgt;
            break;
        case DelayMode::fixed:
            break;
    }
    if (!cfg.feedforward()) n += static_cast<long>(cfg.n_out) * nh;
    return n;
}

geometry::SpatialEmbedding embedding_of(const NetworkConfig& cfg, const ParamSet& p) {
    geometry::SpatialEmbedding e;
    e.positions = p.positions;
    e.scale = cfg.scale_factor;
    if (cfg.tortuous) {
        e.tortuosity = p.tortuosity;
        e.epsilon = cfg.epsilon;
    }
    return e;
}

namespace {

// Slice the full positioned-neuron delay matrix onto the synapse tables.
void slice_full(const NetworkConfig& cfg, const Mat& full, Mat& m1, Mat& m2) {
    int nh = cfg.n_hidden, ntgt = cfg.n_targets(), ni = cfg.n_in;
    m1 = Mat(ni, nh);
    m2 = Mat(nh, ntgt);
    for (int k = 0; k < ni; ++k)
        for (int h = 0; h < nh; ++h) m1(k, h) = full(k, ni + h);
    for (int h = 0; h < nh; ++h)
        for (int m = 0; m < ntgt; ++m)
            m2(h, m) = full(ni + h, cfg.feedforward() ? ni + nh + m : ni + m);
}

double max_used_delay(const Mat& d1, const Mat& d2) {
    double m = 0.0;
    for (double x : d1.a) m = std::max(m, x);
    for (double x : d2.a) m = std::max(m, x);
    return m;
}

void resolve_delays(const NetworkConfig& cfg, const ParamSet& p, Mat& d1, Mat& d2,
                    double max_free) {
    switch (cfg.delay_mode) {
        case DelayMode::spatial: {
            geometry::SpatialEmbedding e = embedding_of(cfg, p);
            geometry::DelayMatrix dm =
                cfg.tortuous ? geometry::tortuous_delays(e) : geometry::euclidean_delays(e);
            slice_full(cfg, dm.delays, d1, d2);
            break;
        }
        case DelayMode::free_delays: {
            d1 = p.free1;
            d2 = p.free2;
            for (double& x : d1.a) x = std::clamp(x, 0.0, max_free);
            for (double& x : d2.a) x = std::clamp(x, 0.0, max_free);
            break;
        }
        case DelayMode::fixed: {
            d1 = Mat(cfg.n_in, cfg.n_hidden);
            d2 = Mat(cfg.n_hidden, cfg.n_targets());
            break;
        }
    }
}

}  // namespace

int derive_capacity(const NetworkConfig& cfg, const ParamSet& p) {
    Mat d1, d2;
    resolve_delays(cfg, p, d1, d2, 1e300);
    double maxd = max_used_delay(d1, d2);
    long c = static_cast<long>(std::ceil(4.0 * maxd / cfg.dt)) + 1;
    c = std::max<long>(c, 8);
    c = std::min<long>(c, cfg.n_steps() + 2);
    return static_cast<int>(c);
}

PreparedNet prepare(const NetworkConfig& cfg, const ParamSet& p, int capacity) {
    PreparedNet net;
    net.capacity = capacity > 0 ? capacity : derive_capacity(cfg, p);
    double max_free = (net.capacity - 1) * cfg.dt;
    resolve_delays(cfg, p, net.delays1, net.delays2, max_free);
    net.steps1.resize(net.delays1.size());
    net.steps2.resize(net.delays2.size());
    net.clamp_count = 0;
    for (std::size_t k = 0; k < net.delays1.size(); ++k)
        net.steps1[k] = geometry::quantize_delay(net.delays1.a[k], cfg.dt, net.capacity,
                                                 &net.clamp_count);
    for (std::size_t k = 0; k < net.delays2.size(); ++k)
        net.steps2[k] = geometry::quantize_delay(net.delays2.a[k], cfg.dt, net.capacity,
                                                 &net.clamp_count);
    return net;
}

GradSink GradSink::zeros_like(const NetworkConfig& cfg, const ParamSet& p) {
    GradSink s;
    s.g = ParamSet::zeros_like(p);
    if (cfg.delay_mode == DelayMode::spatial)
        s.lambda_delay = Mat(cfg.n_positioned(), cfg.n_positioned());
    return s;
}

Simulator::Simulator(const NetworkConfig& cfg, int capacity) : cfg_(cfg) {
    cfg_.validate();
    T_ = cfg_.n_steps();
    M_ = cfg_.n_spiking();
    C_ = capacity;
    if (C_ < 2) throw ConfigError("queue capacity must be >= 2");
    needs_recompute_ = (cfg_.model == NeuronModel::adex) || !cfg_.feedforward();

    v_.resize(M_);
    i_.resize(M_);
    ia_.resize(M_);
    spiked_.resize(M_);
    queues_.resize(M_);
    for (auto& q : queues_) q.reset(C_, false);
    tv_.resize(M_);
    ti_.resize(M_);
    tia_.resize(M_);
    out_step_.resize(cfg_.feedforward() ? cfg_.n_out : 0);
    out_tan_.resize(out_step_.size());
    count_tan_.resize(cfg_.feedforward() ? 0 : cfg_.n_hidden);
}

template <bool kTan>
void Simulator::forward_pass(const PreparedNet& net, const ParamSet& p, const Sample& s,
                             const ParamSet* dir, const Mat* dtan1, const Mat* dtan2) {
    const int T = T_, M = M_, nh = cfg_.n_hidden, ni = cfg_.n_in;
    const int ntgt = cfg_.n_targets();
    const bool ff = cfg_.feedforward();
    const bool adex = cfg_.model == NeuronModel::adex;
    const NeuronParams& np = cfg_.neuron;
    const double dt = cfg_.dt;
    const double alpha_m = std::exp(-dt / np.tau_mem);
    const double alpha_s = std::exp(-dt / np.tau_syn);
    const double inv_tm = 1.0 / np.tau_mem;
    const double adapt_decay = 1.0 - dt / np.tau_adapt;
    const double adapt_drive = dt * np.adapt_a / np.tau_adapt;

    std::fill(v_.begin(), v_.end(), 0.0);
    std::fill(i_.begin(), i_.end(), 0.0);
    std::fill(ia_.begin(), ia_.end(), 0.0);
    std::fill(spiked_.begin(), spiked_.end(), 0);
    for (auto& q : queues_) q.reset(C_, kTan);
    if constexpr (kTan) {
        std::fill(tv_.begin(), tv_.end(), 0.0);
        std::fill(ti_.begin(), ti_.end(), 0.0);
        std::fill(tia_.begin(), tia_.end(), 0.0);
        std::fill(out_tan_.begin(), out_tan_.end(), 0.0);
        std::fill(count_tan_.begin(), count_tan_.end(), 0.0);
    }
    std::fill(out_step_.begin(), out_step_.end(), -1);

    trace_ = SimTrace{};
    trace_.counts.assign(ff ? 0 : nh, 0.0);
    trace_.raster.reserve(64);

    const bool store_ckpts = want_tape_ && needs_recompute_;
    if (store_ckpts) {
        int n_ck = (T + cfg_.checkpoint_interval - 1) / cfg_.checkpoint_interval;
        ckpt_v_.assign(n_ck, {});
        ckpt_i_.assign(n_ck, {});
        ckpt_ia_.assign(n_ck, {});
    }

    std::size_t ev_idx = 0;
    for (int t = 0; t < T; ++t) {
        if (store_ckpts && t % cfg_.checkpoint_interval == 0) {
            int c = t / cfg_.checkpoint_interval;
            ckpt_v_[c] = v_;
            ckpt_i_[c] = i_;
            ckpt_ia_[c] = ia_;
        }
        if (t == probe_step_ && probe_neuron_ >= 0) {
            probe_.v = v_[probe_neuron_];
            if constexpr (kTan) probe_.tangent = tv_[probe_neuron_];
        }

        // input emissions this step; static spike times so T[t_pre] = 0
        while (ev_idx < s.events.size() &&
               static_cast<int>(std::llround(s.events[ev_idx].t / dt)) <= t) {
            const InputEvent& ev = s.events[ev_idx];
            int et = static_cast<int>(std::llround(ev.t / dt));
            ++ev_idx;
            if (et != t || ev.neuron < 0 || ev.neuron >= ni) continue;
            const int row = ev.neuron * nh;
            for (int h = 0; h < nh; ++h) {
                double w = p.w1.a[row + h];
                int arr = t + net.steps1[row + h];
                if constexpr (kTan) {
                    double td = dtan1 ? dtan1->a[row + h] : 0.0;
                    gradcore::enqueue_spike(queues_[h], t, arr, w, dir->w1.a[row + h], td,
                                            np.tau_syn, &trace_.counters);
                } else {
                    gradcore::enqueue_spike(queues_[h], t, arr, w, 0.0, 0.0, np.tau_syn,
                                            &trace_.counters);
                }
            }
        }

        double fin = 0.0;
        for (int n = 0; n < M; ++n) {
            StepJumps j = queues_[n].dequeue(t);
            StepJumps tj;
            if constexpr (kTan) tj = queues_[n].dequeue_tangent(t);

            const double bias = (ff && n >= nh) ? cfg_.bias_out : cfg_.bias_hidden;
            const double v = v_[n], isy = i_[n];
            const int S = threshold(v, spiked_[n] != 0, cfg_.one_spike);

            StepResult r;
            if (!adex)
                r = lif_step_pre(v, isy, bias, alpha_m, alpha_s, inv_tm, dt, j,
                                 cfg_.dvdt_plus_at_reset);
            else
                r = adex_step_pre(v, isy, ia_[n], bias, alpha_s, dt, np, j,
                                  cfg_.dvdt_plus_at_reset);
            if (r.flagged) ++trace_.counters.flagged_steps;

            double ratio = 0.0, tpre = 0.0;
            if (S) {
                double gslope = gradcore::guarded_slope(r.dvdt_minus, &trace_.counters);
                ratio = r.dvdt_plus / gslope;
                double inv_slope = 1.0 / gslope;
                if constexpr (kTan) tpre = -tv_[n] * inv_slope;
                trace_.raster.push_back({n, t, ratio, inv_slope});

                if (ff && n >= nh) {
                    int o = n - nh;
                    if (out_step_[o] < 0) {
                        out_step_[o] = t;
                        if constexpr (kTan) out_tan_[o] = tpre;
                    }
                }
                if (n < nh) {
                    const int row = n * ntgt;
                    for (int m = 0; m < ntgt; ++m) {
                        double w = p.w2.a[row + m];
                        int tgt = ff ? nh + m : m;
                        int arr = t + net.steps2[row + m];
                        if constexpr (kTan) {
                            double tpost = tpre + (dtan2 ? dtan2->a[row + m] : 0.0);
                            gradcore::enqueue_spike(queues_[tgt], t, arr, w, dir->w2.a[row + m],
                                                    tpost, np.tau_syn, &trace_.counters);
                        } else {
                            gradcore::enqueue_spike(queues_[tgt], t, arr, w, 0.0, 0.0,
                                                    np.tau_syn, &trace_.counters);
                        }
                    }
                }
                if (adex && np.adapt_b != 0.0)
                    gradcore::enqueue_adaptation(queues_[n], t, np.adapt_b, tpre, np.tau_adapt,
                                                 &trace_.counters);
                if (!ff) trace_.counts[n] += 1.0;
                spiked_[n] = 1;
            }

            if constexpr (kTan) {
                if (!ff)
                    count_tan_[n] +=
                        objectives::superspike_surrogate(v - NeuronParams::v_threshold) * tv_[n];
                double tvnr;
                if (!adex) {
                    tvnr = alpha_m * tv_[n] + dt * ti_[n] + tj.v_jump;
                } else {
                    tvnr = r.flagged ? 0.0
                                     : (1.0 + dt * adex_dvdt_dv(v, np)) * tv_[n] +
                                           dt * ti_[n] - dt * tia_[n] + tj.v_jump;
                    tia_[n] = adapt_decay * tia_[n] + adapt_drive * tv_[n] + tj.i_adapt_jump;
                }
                tv_[n] = gradcore::v_reset_tangent(S, cfg_.reset_tangent ? ratio : 0.0, tv_[n],
                                                   tvnr);
                ti_[n] = alpha_s * ti_[n] + tj.i_jump;
            }

            v_[n] = gradcore::v_reset(S, r.v_noreset_next);
            i_[n] = r.i_next;
            if (adex) ia_[n] = r.i_adapt_next;
            fin += v_[n] + i_[n] + ia_[n];
        }
        if (!std::isfinite(fin))
            throw SimError("non-finite state at step " + std::to_string(t));
    }
    if (probe_step_ == T && probe_neuron_ >= 0) {
        probe_.v = v_[probe_neuron_];
        if constexpr (kTan) probe_.tangent = tv_[probe_neuron_];
    }

    if (ff) {
        trace_.out_times.assign(cfg_.n_out, T_ * dt);
        bool all_silent = true;
        for (int o = 0; o < cfg_.n_out; ++o)
            if (out_step_[o] >= 0) {
                trace_.out_times[o] = out_step_[o] * dt;
                all_silent = false;
            }
        trace_.silent = all_silent;
    } else {
        double tot = 0.0;
        for (double c : trace_.counts) tot += c;
        trace_.silent = tot == 0.0;
    }
}

const SimTrace& Simulator::forward(const PreparedNet& net, const ParamSet& p, const Sample& s) {
    want_tape_ = false;
    forward_pass<false>(net, p, s, nullptr, nullptr, nullptr);
    return trace_;
}

VoltageProbe Simulator::probe_voltage(const PreparedNet& net, const ParamSet& p,
                                      const ParamSet* dir, const Sample& s, int step,
                                      int neuron) {
    if (neuron < 0 || neuron >= M_ || step < 0 || step > T_)
        throw ConfigError("probe_voltage: step or neuron out of range");
    probe_step_ = step;
    probe_neuron_ = neuron;
    probe_ = VoltageProbe{};
    want_tape_ = false;
    if (dir) {
        objectives::TtfsLossParams dummy;
        jvp(net, p, *dir, s, dummy);
    } else {
        forward_pass<false>(net, p, s, nullptr, nullptr, nullptr);
    }
    probe_step_ = probe_neuron_ = -1;
    return probe_;
}

double trace_loss(const NetworkConfig& cfg, const objectives::TtfsLossParams& lp,
                  const ParamSet& p, const SimTrace& trace, int label,
                  std::vector<double>* dl_dt) {
    if (cfg.feedforward())
        return objectives::ttfs_hinge(trace.out_times, static_cast<std::size_t>(label), lp, dl_dt);
    return objectives::readout_ce(trace.counts, p.readout, static_cast<std::size_t>(label));
}

int classify(const NetworkConfig& cfg, const ParamSet& p, const SimTrace& trace, bool* silent) {
    if (silent) *silent = trace.silent;
    if (cfg.feedforward())
        return static_cast<int>(objectives::argmin_tie_low(trace.out_times));
    std::vector<double> logits(cfg.n_out, 0.0);
    for (int o = 0; o < cfg.n_out; ++o)
        for (int h = 0; h < cfg.n_hidden; ++h) logits[o] += p.readout(o, h) * trace.counts[h];
    return static_cast<int>(objectives::argmax_tie_low(logits));
}

JvpResult Simulator::jvp(const PreparedNet& net, const ParamSet& p, const ParamSet& dir,
                         const Sample& s, const objectives::TtfsLossParams& loss) {
    Mat dtan1, dtan2;
    const Mat *p1 = nullptr, *p2 = nullptr;
    if (cfg_.delay_mode == DelayMode::spatial) {
        geometry::SpatialEmbedding e = embedding_of(cfg_, p);
        Mat full = geometry::delay_tangent(e, dir.positions,
                                           cfg_.tortuous ? &dir.tortuosity : nullptr);
        slice_full(cfg_, full, dtan1, dtan2);
        p1 = &dtan1;
        p2 = &dtan2;
    } else if (cfg_.delay_mode == DelayMode::free_delays) {
        p1 = &dir.free1;
        p2 = &dir.free2;
    }

    want_tape_ = false;
    forward_pass<true>(net, p, s, &dir, p1, p2);

    JvpResult r;
    if (cfg_.feedforward()) {
        std::vector<double> dl_dt;
        r.loss = objectives::ttfs_hinge(trace_.out_times, static_cast<std::size_t>(s.label),
                                        loss, &dl_dt);
        for (std::size_t k = 0; k < dl_dt.size(); ++k) r.loss_tangent += dl_dt[k] * out_tan_[k];
    } else {
        Mat dro(p.readout.rows, p.readout.cols);
        std::vector<double> dcounts;
        r.loss = objectives::readout_ce(trace_.counts, p.readout,
                                        static_cast<std::size_t>(s.label), &dro, &dcounts);
        for (std::size_t h = 0; h < dcounts.size(); ++h)
            r.loss_tangent += dcounts[h] * count_tan_[h];
        for (std::size_t k = 0; k < dro.size(); ++k)
            r.loss_tangent += dro.a[k] * dir.readout.a[k];
    }
    return r;
}

void Simulator::reverse(const PreparedNet& net, const ParamSet& p, const Sample& s,
                        const objectives::TtfsLossParams& loss, GradSink& sink) {
    want_tape_ = true;
    forward_pass<false>(net, p, s, nullptr, nullptr, nullptr);
    want_tape_ = false;
    reverse_pass(net, p, s, loss, sink);
}

void Simulator::reverse_pass(const PreparedNet& net, const ParamSet& p, const Sample& s,
                             const objectives::TtfsLossParams& loss, GradSink& sink) {
    const int T = T_, M = M_, nh = cfg_.n_hidden, ni = cfg_.n_in;
    const int ntgt = cfg_.n_targets();
    const int C = C_;
    const bool ff = cfg_.feedforward();
    const bool adex = cfg_.model == NeuronModel::adex;
    const NeuronParams& np = cfg_.neuron;
    const double dt = cfg_.dt;
    const double alpha_m = std::exp(-dt / np.tau_mem);
    const double alpha_s = std::exp(-dt / np.tau_syn);
    const double inv_tausyn = 1.0 / np.tau_syn;
    const double adapt_decay = 1.0 - dt / np.tau_adapt;
    const double adapt_drive = dt * np.adapt_a / np.tau_adapt;
    const bool spatial = cfg_.delay_mode == DelayMode::spatial;
    const bool free_mode = cfg_.delay_mode == DelayMode::free_delays;

    // loss primal + seed adjoints
    std::vector<double> dl_dt, lcounts;
    double loss_val;
    if (ff) {
        loss_val = objectives::ttfs_hinge(trace_.out_times, static_cast<std::size_t>(s.label),
                                          loss, &dl_dt);
    } else {
        Mat dro(p.readout.rows, p.readout.cols);
        loss_val = objectives::readout_ce(trace_.counts, p.readout,
                                          static_cast<std::size_t>(s.label), &dro, &lcounts);
        for (std::size_t k = 0; k < dro.size(); ++k) sink.g.readout.a[k] += dro.a[k];
    }
    sink.loss_sum += loss_val;
    ++sink.n_samples;
    bool silent = false;
    if (classify(cfg_, p, trace_, &silent) == s.label) ++sink.n_correct;
    if (silent) ++sink.n_silent;
    sink.counters.grazing += trace_.counters.grazing;
    sink.counters.clamped += trace_.counters.clamped;
    sink.counters.flagged_steps += trace_.counters.flagged_steps;

    lv_.assign(M, 0.0);
    li_.assign(M, 0.0);
    lia_.assign(M, 0.0);
    ring_i_.assign(static_cast<std::size_t>(M) * C, 0.0);
    ring_v_.assign(static_cast<std::size_t>(M) * C, 0.0);
    if (adex) ring_a_.assign(static_cast<std::size_t>(M) * C, 0.0);
    spike_flag_.assign(M, 0);

    const int K = cfg_.checkpoint_interval;
    if (needs_recompute_) {
        buf_v_.assign(static_cast<std::size_t>(K) * M, 0.0);
        buf_flag_.assign(static_cast<std::size_t>(K) * M, 0);
    }

    // Recompute one checkpoint segment [a, a+len): per-step voltages and AdEx
    // cap flags. Deliveries inside the segment are rebuilt from the two event
    // tapes (input events, spike raster); the queue state itself is not needed.
    // Spike decisions come from the tape, so a recomputed voltage that differs
    // in the last ulp can never flip a reset against the recorded forward.
    auto recompute = [&](int a, int len) {
        int c = a / K;
        std::vector<double> rv = ckpt_v_[c], ri = ckpt_i_[c], ria = ckpt_ia_[c];
        std::vector<double> dij(static_cast<std::size_t>(len) * M, 0.0);
        std::vector<double> daj;
        if (adex) daj.assign(static_cast<std::size_t>(len) * M, 0.0);
        for (const auto& ev : s.events) {
            int et = static_cast<int>(std::llround(ev.t / dt));
            if (et >= T || ev.neuron < 0 || ev.neuron >= ni) continue;
            const int row = ev.neuron * nh;
            for (int h = 0; h < nh; ++h) {
                int arr = et + net.steps1[row + h];
                if (arr >= a && arr < a + len)
                    dij[static_cast<std::size_t>(arr - a) * M + h] += p.w1.a[row + h];
            }
        }
        for (const auto& rec : trace_.raster) {
            if (rec.neuron < nh) {
                const int row = rec.neuron * ntgt;
                for (int m = 0; m < ntgt; ++m) {
                    int arr = rec.step + net.steps2[row + m];
                    int tgt = ff ? nh + m : m;
                    if (arr >= a && arr < a + len)
                        dij[static_cast<std::size_t>(arr - a) * M + tgt] += p.w2.a[row + m];
                }
            }
            if (adex && np.adapt_b != 0.0) {
                int arr = rec.step + 1;
                if (arr >= a && arr < a + len)
                    daj[static_cast<std::size_t>(arr - a) * M + rec.neuron] += np.adapt_b;
            }
        }
        auto lo = std::lower_bound(trace_.raster.begin(), trace_.raster.end(), a,
                                   [](const SpikeRec& r, int step) { return r.step < step; });
        std::vector<std::uint8_t> sflag(M, 0);
        for (int k = 0; k < len; ++k) {
            auto hi = lo;
            while (hi != trace_.raster.end() && hi->step == a + k) {
                sflag[hi->neuron] = 1;
                ++hi;
            }
            for (int n = 0; n < M; ++n) {
                buf_v_[static_cast<std::size_t>(k) * M + n] = rv[n];
                const double bias = (ff && n >= nh) ? cfg_.bias_out : cfg_.bias_hidden;
                StepJumps j{dij[static_cast<std::size_t>(k) * M + n], 0.0,
                            adex ? daj[static_cast<std::size_t>(k) * M + n] : 0.0};
                const int S = sflag[n];
                StepResult r;
                if (!adex)
                    r = lif_step_pre(rv[n], ri[n], bias, alpha_m, alpha_s, 1.0 / np.tau_mem,
                                     dt, j, cfg_.dvdt_plus_at_reset);
                else
                    r = adex_step_pre(rv[n], ri[n], ria[n], bias, alpha_s, dt, np, j,
                                      cfg_.dvdt_plus_at_reset);
                buf_flag_[static_cast<std::size_t>(k) * M + n] = r.flagged ? 1 : 0;
                rv[n] = gradcore::v_reset(S, r.v_noreset_next);
                ri[n] = r.i_next;
                if (adex) ria[n] = r.i_adapt_next;
            }
            while (lo != hi) {
                sflag[lo->neuron] = 0;
                ++lo;
            }
        }
    };

    std::ptrdiff_t sp_hi = static_cast<std::ptrdiff_t>(trace_.raster.size());
    std::ptrdiff_t ev_hi = static_cast<std::ptrdiff_t>(s.events.size());
    std::vector<double> lv_saved;  // adjoint of v_{t+1} per spike, for the reset ratio

    int cur_seg = -1;
    for (int t = T - 1; t >= 0; --t) {
        if (needs_recompute_) {
            int seg = t / K;
            if (seg != cur_seg) {
                int a = seg * K;
                recompute(a, std::min(K, T - a));
                cur_seg = seg;
            }
        }
        const double* vrow =
            needs_recompute_ ? &buf_v_[static_cast<std::size_t>(t - cur_seg * K) * M] : nullptr;
        const std::uint8_t* frow =
            needs_recompute_ ? &buf_flag_[static_cast<std::size_t>(t - cur_seg * K) * M]
                             : nullptr;

        // spikes at this step
        std::ptrdiff_t sp_lo = sp_hi;
        while (sp_lo > 0 && trace_.raster[sp_lo - 1].step == t) --sp_lo;
        lv_saved.assign(static_cast<std::size_t>(sp_hi - sp_lo), 0.0);
        for (std::ptrdiff_t k = sp_lo; k < sp_hi; ++k) {
            spike_flag_[trace_.raster[k].neuron] = 1;
            lv_saved[k - sp_lo] = lv_[trace_.raster[k].neuron];  // lambda(v_{t+1})
        }

        // transition transpose: lv/li/lia become adjoints of the step-t state
        const std::size_t slot = static_cast<std::size_t>(t % C);
        for (int n = 0; n < M; ++n) {
            const double lvp = lv_[n], lip = li_[n];
            const int S = spike_flag_[n];
            if (!adex) {
                ring_v_[static_cast<std::size_t>(n) * C + slot] = S ? 0.0 : lvp;
                ring_i_[static_cast<std::size_t>(n) * C + slot] = lip;
                lv_[n] = S ? 0.0 : alpha_m * lvp;  // ratio path added with the tape below
                li_[n] = alpha_s * lip + (S ? 0.0 : dt * lvp);
            } else {
                const int dead = S || frow[n];  // reset or voltage-cap clip
                const double liap = lia_[n];
                ring_v_[static_cast<std::size_t>(n) * C + slot] = dead ? 0.0 : lvp;
                ring_i_[static_cast<std::size_t>(n) * C + slot] = lip;
                ring_a_[static_cast<std::size_t>(n) * C + slot] = liap;
                const double vjac = dead ? 0.0 : 1.0 + dt * adex_dvdt_dv(vrow[n], np);
                lv_[n] = vjac * lvp + adapt_drive * liap;
                li_[n] = alpha_s * lip + (dead ? 0.0 : dt * lvp);
                lia_[n] = adapt_decay * liap - (dead ? 0.0 : dt * lvp);
            }
            if (!ff)
                lv_[n] += objectives::superspike_surrogate(vrow[n] - NeuronParams::v_threshold) *
                          lcounts[n];
        }

        // event transpose: spike-time adjoints gathered from the future slots,
        // reset ratio path restored from the tape
        for (std::ptrdiff_t k = sp_hi - 1; k >= sp_lo; --k) {
            const SpikeRec& rec = trace_.raster[k];
            const int n = rec.neuron;
            if (cfg_.reset_tangent) lv_[n] += rec.ratio * lv_saved[k - sp_lo];
            double ltpre = 0.0;
            if (n < nh) {
                const int row = n * ntgt;
                for (int m = 0; m < ntgt; ++m) {
                    int arr = t + net.steps2[row + m];
                    if (arr >= T) continue;
                    int tgt = ff ? nh + m : m;
                    const std::size_t sl = static_cast<std::size_t>(tgt) * C + arr % C;
                    const double lij = ring_i_[sl];
                    const double lvj = ring_v_[sl];
                    const double w = p.w2.a[row + m];
                    sink.g.w2.a[row + m] += lij;
                    const double ltpost = w * inv_tausyn * lij - w * lvj;
                    if (spatial) {
                        sink.lambda_delay(ni + n, ff ? ni + nh + m : ni + m) += ltpost;
                    } else if (free_mode) {
                        sink.g.free2.a[row + m] += ltpost;
                    }
                    ltpre += ltpost;
                }
            }
            if (adex && np.adapt_b != 0.0 && t + 1 < T)
                ltpre += (np.adapt_b / np.tau_adapt) *
                         ring_a_[static_cast<std::size_t>(n) * C + (t + 1) % C];
            if (ff && n >= nh && out_step_[n - nh] == t) ltpre += dl_dt[n - nh];
            lv_[n] += -rec.inv_slope * ltpre;
        }

        for (std::ptrdiff_t k = sp_lo; k < sp_hi; ++k)
            spike_flag_[trace_.raster[k].neuron] = 0;
        sp_hi = sp_lo;

        // input event transpose
        while (ev_hi > 0 &&
               static_cast<int>(std::llround(s.events[ev_hi - 1].t / dt)) >= t) {
            --ev_hi;
            const InputEvent& ev = s.events[ev_hi];
            int et = static_cast<int>(std::llround(ev.t / dt));
            if (et != t || ev.neuron < 0 || ev.neuron >= ni) continue;
            const int row = ev.neuron * nh;
            for (int h = 0; h < nh; ++h) {
                int arr = t + net.steps1[row + h];
                if (arr >= T) continue;
                const std::size_t sl = static_cast<std::size_t>(h) * C + arr % C;
                const double lij = ring_i_[sl];
                const double lvj = ring_v_[sl];
                const double w = p.w1.a[row + h];
                sink.g.w1.a[row + h] += lij;
                const double ltpost = w * inv_tausyn * lij - w * lvj;
                if (spatial)
                    sink.lambda_delay(ev.neuron, ni + h) += ltpost;
                else if (free_mode)
                    sink.g.free1.a[row + h] += ltpost;
            }
        }
    }
}

void finalize_gradients(const NetworkConfig& cfg, const ParamSet& p, GradSink& sink) {
    if (cfg.delay_mode == DelayMode::spatial && !sink.lambda_delay.empty()) {
        geometry::SpatialEmbedding e = embedding_of(cfg, p);
        geometry::accumulate_position_grad(e, sink.lambda_delay, sink.g.positions,
                                           cfg.tortuous ? &sink.g.tortuosity : nullptr);
        sink.lambda_delay.zero();
    }
}

SimTrace run_forward(const NetworkConfig& cfg, const PreparedNet& net, const ParamSet& p,
                     const Sample& s) {
    Simulator sim(cfg, net.capacity);
    return sim.forward(net, p, s);
}

}  // namespace spsnn::sim

#include "spsnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "spsnn/datasets.hpp"
#include "spsnn/rng.hpp"

namespace spsnn::train {

void adam_step(sim::ParamSet& p, const sim::ParamSet& g, AdamState& st, const AdamConfig& cfg,
               double lr) {
    ++st.t;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));

    const Mat* gs[7];
    Mat* ps[7];
    Mat* ms[7];
    Mat* vs[7];
    const char* names[7];
    int nb = 0;
    {
        int k = 0;
        p.for_each_block([&](const char* name, Mat& m) {
            names[k] = name;
            ps[k] = &m;
            ++k;
        });
        nb = k;
        k = 0;
        g.for_each_block([&](const char*, const Mat& m) { gs[k++] = &m; });
        k = 0;
        st.m.for_each_block([&](const char*, Mat& m) { ms[k++] = &m; });
        k = 0;
        st.v.for_each_block([&](const char*, Mat& m) { vs[k++] = &m; });
    }

    for (int b = 0; b < nb; ++b) {
        Mat& pm = *ps[b];
        const Mat& gm = *gs[b];
        Mat& mm = *ms[b];
        Mat& vm = *vs[b];
        if (pm.size() != gm.size())
            throw ConfigError(std::string("adam: shape mismatch in block ") + names[b]);
        for (std::size_t k = 0; k < pm.size(); ++k) {
            double gk = gm.a[k];
            if (!std::isfinite(gk))
                throw SimError(std::string("NaN gradient in block ") + names[b] + " at index " +
                               std::to_string(k));
            mm.a[k] = cfg.beta1 * mm.a[k] + (1.0 - cfg.beta1) * gk;
            vm.a[k] = cfg.beta2 * vm.a[k] + (1.0 - cfg.beta2) * gk * gk;
            double mhat = mm.a[k] / bc1;
            double vhat = vm.a[k] / bc2;
            pm.a[k] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

double lr_schedule(const ScheduleConfig& s, long step) {
    if (step <= 0) return 0.0;
    if (step <= s.warmup_steps)
        return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
    double lo = s.final_fraction * s.peak_lr;
    if (step >= s.total_steps) return lo;
    double frac = static_cast<double>(step - s.warmup_steps) /
                  static_cast<double>(s.total_steps - s.warmup_steps);
    return lo + (s.peak_lr - lo) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

void magnitude_prune(sim::ParamSet& p, double sp) {
    if (!(sp >= 0.0 && sp <= 1.0)) throw ConfigError("sparsity fraction must lie in [0,1]");
    if (sp == 0.0) return;
    std::vector<double> mags;
    mags.reserve(p.w1.size() + p.w2.size());
    for (double w : p.w1.a) mags.push_back(std::abs(w));
    for (double w : p.w2.a) mags.push_back(std::abs(w));
    std::size_t n = mags.size();
    std::size_t k = static_cast<std::size_t>(std::ceil(sp * static_cast<double>(n)));
    if (k == 0) return;
    if (k >= n) {
        p.w1.zero();
        p.w2.zero();
        return;
    }
    std::nth_element(mags.begin(), mags.begin() + (k - 1), mags.end());
    double thr = mags[k - 1];
    for (double& w : p.w1.a)
        if (std::abs(w) <= thr) w = 0.0;
    for (double& w : p.w2.a)
        if (std::abs(w) <= thr) w = 0.0;
}

double weight_sparsity(const sim::ParamSet& p) {
    std::size_t n = p.w1.size() + p.w2.size(), z = 0;
    if (n == 0) return 0.0;
    for (double w : p.w1.a) z += w == 0.0;
    for (double w : p.w2.a) z += w == 0.0;
    return static_cast<double>(z) / static_cast<double>(n);
}

DataSplit load_data(const TrainConfig& cfg) {
    DataSplit d;
    if (cfg.task == Task::yinyang) {
        auto tr = data::generate_yinyang(cfg.n_train, Rng::derive(cfg.data_seed, 1));
        auto te = data::generate_yinyang(cfg.n_test, Rng::derive(cfg.data_seed, 2));
        d.train = data::encode_yy_all(tr, cfg.t_window);
        d.test = data::encode_yy_all(te, cfg.t_window);
    } else {
        d.train = data::to_samples(data::read_spike_file(cfg.train_path));
        d.test = data::to_samples(data::read_spike_file(cfg.test_path));
    }
    return d;
}

EvalResult evaluate(const sim::NetworkConfig& net, const objectives::TtfsLossParams& ttfs,
                    const sim::ParamSet& p, const std::vector<sim::Sample>& samples,
                    int capacity) {
    sim::PreparedNet prepared = sim::prepare(net, p, capacity);
    sim::Simulator s(net, prepared.capacity);
    EvalResult r;
    r.sparsity = weight_sparsity(p);
    long correct = 0;
    for (const auto& smp : samples) {
        const sim::SimTrace& tr = s.forward(prepared, p, smp);
        r.loss += sim::trace_loss(net, ttfs, p, tr, smp.label);
        bool silent = false;
        if (sim::classify(net, p, tr, &silent) == smp.label) ++correct;
        if (silent) ++r.silent;
    }
    if (!samples.empty()) {
        r.loss /= static_cast<double>(samples.size());
        r.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    }
    return r;
}

namespace {

TrainResult train_attempt(const TrainConfig& cfg, std::uint64_t seed, double peak_lr,
                          const DataSplit& data) {
    sim::NetworkConfig net = cfg.net;
    net.validate();
    cfg.ttfs.validate();

    sim::ParamSet params = sim::init_params(net, seed, cfg.init);
    int capacity = sim::derive_capacity(net, params);
    double max_free = (capacity - 1) * net.dt;

    AdamState adam = AdamState::zeros_like(params);
    ScheduleConfig sched = cfg.sched;
    sched.peak_lr = peak_lr;

    sim::Simulator simulator(net, capacity);
    sim::GradSink sink = sim::GradSink::zeros_like(net, params);
    long params_n = sim::param_count(net);

    std::vector<std::size_t> order(data.train.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

    TrainResult result;
    result.capacity = capacity;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffler(Rng::derive(seed, 50000 + static_cast<std::uint64_t>(epoch)));
        shuffler.shuffle(order);

        double ep_loss = 0.0;
        long ep_correct = 0, ep_silent = 0, ep_count = 0;
        long clamp_now = 0;
        double lr_last = 0.0;

        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            sim::PreparedNet prepared = sim::prepare(net, params, capacity);
            clamp_now = prepared.clamp_count;

            sink.g.for_each_block([](const char*, Mat& m) { m.zero(); });
            if (!sink.lambda_delay.empty()) sink.lambda_delay.zero();
            sink.loss_sum = 0;
            sink.n_samples = sink.n_correct = sink.n_silent = 0;
            sink.counters = {};

            for (std::size_t k = b0; k < b1; ++k)
                simulator.reverse(prepared, params, data.train[order[k]], cfg.ttfs, sink);
            sim::finalize_gradients(net, params, sink);

            double inv = 1.0 / static_cast<double>(sink.n_samples);
            sink.g.for_each_block([&](const char*, Mat& m) {
                for (double& x : m.a) x *= inv;
            });

            double lr = lr_schedule(sched, adam.t + 1);
            lr_last = lr;
            adam_step(params, sink.g, adam, cfg.adam, lr);
            if (net.delay_mode == sim::DelayMode::free_delays) {
                for (double& x : params.free1.a) x = std::clamp(x, 0.0, max_free);
                for (double& x : params.free2.a) x = std::clamp(x, 0.0, max_free);
            }

            ep_loss += sink.loss_sum;
            ep_correct += sink.n_correct;
            ep_silent += sink.n_silent;
            ep_count += sink.n_samples;
            clamp_now += sink.counters.clamped;
        }

        // dynamic sparsification: once per epoch, after the epoch's updates
        if (cfg.sparsity.mode == SparsityMode::dynamic_prune)
            magnitude_prune(params, cfg.sparsity.sp);

        EvalResult test = evaluate(net, cfg.ttfs, params, data.test, capacity);
        if (!std::isfinite(ep_loss) || !std::isfinite(test.loss))
            throw SimError("non-finite loss at epoch " + std::to_string(epoch));

        EpochRow tr_row{epoch,
                        "train",
                        ep_count ? ep_loss / static_cast<double>(ep_count) : 0.0,
                        ep_count ? static_cast<double>(ep_correct) / ep_count : 0.0,
                        lr_last,
                        weight_sparsity(params),
                        params_n,
                        clamp_now,
                        ep_silent};
        EpochRow te_row{epoch,   "test",   test.loss, test.accuracy, lr_last,
                        test.sparsity, params_n, clamp_now,     test.silent};
        result.rows.push_back(tr_row);
        result.rows.push_back(te_row);
        result.final_test_acc = test.accuracy;
        result.final_test_loss = test.loss;
    }

    // one-shot post-training pruning: the delivered model is the pruned one
    if (cfg.sparsity.mode == SparsityMode::static_prune) {
        magnitude_prune(params, cfg.sparsity.sp);
        EvalResult test = evaluate(net, cfg.ttfs, params, data.test, capacity);
        result.rows.push_back(EpochRow{cfg.epochs, "test", test.loss, test.accuracy, 0.0,
                                       test.sparsity, params_n, 0, test.silent});
        result.final_test_acc = test.accuracy;
        result.final_test_loss = test.loss;
    }

    result.model = std::move(params);
    return result;
}

}  // namespace

TrainResult train_run(const TrainConfig& cfg, std::uint64_t seed) {
    DataSplit data = load_data(cfg);
    try {
        return train_attempt(cfg, seed, cfg.sched.peak_lr, data);
    } catch (const SimError&) {
        if (!cfg.lr_halving_retry) throw;
        TrainResult r = train_attempt(cfg, seed, 0.5 * cfg.sched.peak_lr, data);
        r.halvings = 1;
        return r;
    }
}

void write_metrics_csv(const std::string& path, const std::vector<EpochRow>& rows) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ConfigError("cannot open for writing: " + path);
    std::fprintf(f, "epoch,split,loss,accuracy,lr,sparsity,param_count,clamp_count,silent_count\n");
    for (const auto& r : rows)
        std::fprintf(f, "%d,%s,%.17g,%.17g,%.17g,%.17g,%ld,%ld,%ld\n", r.epoch, r.split.c_str(),
                     r.loss, r.accuracy, r.lr, r.sparsity, r.param_count, r.clamp_count,
                     r.silent_count);
    std::fclose(f);
}

Aggregate aggregate(std::vector<double> values) {
    Aggregate a;
    if (values.empty()) return a;
    std::sort(values.begin(), values.end());
    auto q = [&](double p) {
        double idx = p * static_cast<double>(values.size() - 1);
        std::size_t lo = static_cast<std::size_t>(idx);
        std::size_t hi = std::min(lo + 1, values.size() - 1);
        double f = idx - static_cast<double>(lo);
        return values[lo] * (1.0 - f) + values[hi] * f;
    };
    a.q1 = q(0.25);
    a.median = q(0.5);
    a.q3 = q(0.75);
    return a;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                int jobs) {
    ExperimentResult ex;
    ex.runs.resize(seeds.size());
    ex.params = sim::param_count(cfg.net);

    jobs = std::max(1, jobs);
    std::size_t next = 0;
    while (next < seeds.size()) {
        std::size_t batch = std::min<std::size_t>(jobs, seeds.size() - next);
        std::vector<std::thread> pool;
        for (std::size_t k = 1; k < batch; ++k)
            pool.emplace_back([&, idx = next + k] { ex.runs[idx] = train_run(cfg, seeds[idx]); });
        ex.runs[next] = train_run(cfg, seeds[next]);
        for (auto& th : pool) th.join();
        next += batch;
    }

    std::vector<double> accs;
    for (const auto& r : ex.runs) accs.push_back(r.final_test_acc);
    ex.test_acc = aggregate(accs);
    return ex;
}

}  // namespace spsnn::train

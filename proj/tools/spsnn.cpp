#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spsnn/checkpoint.hpp"
#include "spsnn/config.hpp"
#include "spsnn/datasets.hpp"
#include "spsnn/gradcheck.hpp"
#include "spsnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace spsnn;

namespace {

int thread_cap(int jobs) {
    if (const char* env = std::getenv("SPSNN_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) jobs = std::min(jobs, cap);
    }
    return std::max(1, jobs);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    f << text;
}

struct SweepPoint {
    std::string label;
    config::RunConfig rc;
};

std::vector<SweepPoint> sweep_points(const config::RunConfig& base, const std::string& axis,
                                     const std::vector<std::string>& values) {
    std::vector<SweepPoint> pts;
    for (const std::string& v : values) {
        SweepPoint p{axis + "=" + v, base};
        sim::NetworkConfig& net = p.rc.train.net;
        if (axis == "dimension") {
            if (v == "inf") {
                net.delay_mode = sim::DelayMode::free_delays;
            } else {
                int d = std::stoi(v);
                if (d == 0)
                    net.delay_mode = sim::DelayMode::fixed;
                else {
                    net.delay_mode = sim::DelayMode::spatial;
                    net.dimension = d;
                }
            }
        } else if (axis == "hidden") {
            net.n_hidden = std::stoi(v);
        } else if (axis == "sparsity") {
            if (p.rc.train.sparsity.mode == train::SparsityMode::none)
                throw ConfigError("sparsity sweep needs sparsity.mode 'dynamic' or 'static'");
            p.rc.train.sparsity.sp = std::stod(v);
        } else {
            throw ConfigError("unknown sweep axis: " + axis);
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
    config::RunConfig rc = config::load_config(config_path);
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "config.resolved.json", config::resolved_json(rc));

    train::TrainResult result = train_run(rc.train, seed);
    train::write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), result.rows);
    io::save_model((fs::path(out_dir) / "model.spnn").string(), result.model);

    std::printf("train: seed %llu, final test accuracy %.4f, loss %.6f%s\n",
                static_cast<unsigned long long>(seed), result.final_test_acc,
                result.final_test_loss, result.halvings ? " (lr halved once)" : "");
    std::printf("train: wrote %s/metrics.csv and %s/model.spnn\n", out_dir.c_str(),
                out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& model_path, std::string config_path, double sp,
             const std::string& data_path) {
    if (config_path.empty())
        config_path = (fs::path(model_path).parent_path() / "config.resolved.json").string();
    config::RunConfig rc = config::load_config(config_path);
    sim::ParamSet model = io::load_model(model_path);
    if (sp > 0.0) train::magnitude_prune(model, sp);

    std::vector<sim::Sample> samples;
    if (!data_path.empty()) {
        samples = data::to_samples(data::read_spike_file(data_path));
    } else {
        samples = train::load_data(rc.train).test;
    }
    train::EvalResult r = train::evaluate(rc.train.net, rc.train.ttfs, model, samples);
    std::printf("eval: accuracy %.4f, loss %.6f, silent %ld/%zu, weight sparsity %.4f, "
                "trainable params %ld\n",
                r.accuracy, r.loss, r.silent, samples.size(), r.sparsity,
                sim::param_count(rc.train.net));
    return 0;
}

int cmd_gradcheck(const std::string& config_path, double tolerance, std::uint64_t seed) {
    config::RunConfig rc = config::load_config(config_path);
    const sim::NetworkConfig& net = rc.train.net;
    sim::ParamSet params = sim::init_params(net, seed, rc.train.init);
    std::vector<sim::Sample> batch = gradcheck::random_batch(
        net, rc.gradcheck.batch, rc.gradcheck.input_window, rc.gradcheck.events_per_input, seed);

    gradcheck::Options opt;
    opt.h = rc.gradcheck.h;
    gradcheck::Report report = gradcheck::finite_difference_check(net, params, batch,
                                                                  rc.train.ttfs, opt);
    std::printf("gradcheck: h=%g, batch=%d, tolerance=%g\n%s", opt.h, rc.gradcheck.batch,
                tolerance, report.to_string().c_str());
    bool ok = report.pass(tolerance);
    std::printf("gradcheck: %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& axis, const std::vector<std::string>& values, int n_seeds,
              std::uint64_t seed, int jobs) {
    config::RunConfig base = config::load_config(config_path);
    std::vector<SweepPoint> pts = sweep_points(base, axis, values);
    fs::create_directories(out_dir);
    jobs = thread_cap(jobs);

    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < n_seeds; ++k) seeds.push_back(seed + static_cast<std::uint64_t>(k));

    fs::path agg_path = fs::path(out_dir) / "aggregate.csv";
    std::ofstream agg(agg_path, std::ios::binary);
    agg << "axis,value,n_seeds,acc_median,acc_q1,acc_q3,param_count\n";

    for (std::size_t i = 0; i < pts.size(); ++i) {
        const SweepPoint& pt = pts[i];
        train::ExperimentResult ex = train::run_experiment(pt.rc.train, seeds, jobs);
        fs::path pdir = fs::path(out_dir) / (axis + "_" + values[i]);
        fs::create_directories(pdir);
        write_text(pdir / "config.resolved.json", config::resolved_json(pt.rc));
        for (std::size_t s = 0; s < ex.runs.size(); ++s) {
            fs::path rdir = pdir / ("seed" + std::to_string(seeds[s]));
            fs::create_directories(rdir);
            train::write_metrics_csv((rdir / "metrics.csv").string(), ex.runs[s].rows);
            io::save_model((rdir / "model.spnn").string(), ex.runs[s].model);
        }
        char line[256];
        std::snprintf(line, sizeof line, "%s,%s,%d,%.6f,%.6f,%.6f,%ld\n", axis.c_str(),
                      values[i].c_str(), n_seeds, ex.test_acc.median, ex.test_acc.q1,
                      ex.test_acc.q3, ex.params);
        agg << line;
        std::printf("sweep %s: median %.4f  iqr [%.4f, %.4f]  params %ld\n", pt.label.c_str(),
                    ex.test_acc.median, ex.test_acc.q1, ex.test_acc.q3, ex.params);
    }
    std::printf("sweep: wrote %s\n", agg_path.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spsnn: spatially embedded spiking network trainer"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", model_path, data_path, axis = "dimension";
    std::string values_csv = "0,1,2,3,inf";
    std::uint64_t seed = 1;
    double sp = 0.0, tolerance = 1e-2;
    int n_seeds = 5, jobs = 1;

    CLI::App* t = app.add_subcommand("train", "train a network, write metrics and checkpoint");
    t->add_option("--config", config_path, "config JSON")->required();
    t->add_option("--out", out_dir, "output directory");
    t->add_option("--seed", seed, "run seed");

    CLI::App* e = app.add_subcommand("eval", "evaluate a saved model");
    e->add_option("--model", model_path, "model.spnn path")->required();
    e->add_option("--config", config_path, "config (default: sibling config.resolved.json)");
    e->add_option("--sp", sp, "one-shot magnitude pruning fraction before eval");
    e->add_option("--data", data_path, "spike file overriding the test set");

    CLI::App* g = app.add_subcommand("gradcheck", "finite-difference gradient check");
    g->add_option("--config", config_path, "config JSON")->required();
    g->add_option("--tolerance", tolerance, "max relative error to pass");
    g->add_option("--seed", seed, "randomization seed");

    CLI::App* w = app.add_subcommand("sweep", "train across an axis, aggregate over seeds");
    w->add_option("--config", config_path, "base config JSON")->required();
    w->add_option("--out", out_dir, "output directory");
    w->add_option("--axis", axis, "dimension | hidden | sparsity");
    w->add_option("--values", values_csv, "comma-separated axis values");
    w->add_option("--seeds", n_seeds, "number of seeds per point");
    w->add_option("--seed", seed, "first seed value");
    w->add_option("--jobs", jobs, "parallel runs (capped by SPSNN_THREADS)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(t)) return cmd_train(config_path, out_dir, seed);
        if (app.got_subcommand(e)) return cmd_eval(model_path, config_path, sp, data_path);
        if (app.got_subcommand(g)) return cmd_gradcheck(config_path, tolerance, seed);
        if (app.got_subcommand(w)) {
            std::vector<std::string> values;
            std::string cur;
            for (char c : values_csv + ",") {
                if (c == ',') {
                    if (!cur.empty()) values.push_back(cur);
                    cur.clear();
                } else {
                    cur += c;
                }
            }
            return cmd_sweep(config_path, out_dir, axis, values, n_seeds, seed, jobs);
        }
    } catch (const ConfigError& ex) {
        std::fprintf(stderr, "config error: %s\n", ex.what());
        return 2;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}

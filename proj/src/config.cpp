#include "spsnn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace spsnn::config {

using nlohmann::json;

namespace {

// Every consumed key is checked off; anything left over is rejected by name.
struct Section {
    const json& j;
    std::string path;
    std::set<std::string> seen;

    Section(const json& obj, std::string p) : j(obj), path(std::move(p)) {
        if (!j.is_object()) throw ConfigError("config section '" + path + "' must be an object");
    }

    bool has(const std::string& key) {
        seen.insert(key);
        return j.contains(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + path + key + "' has the wrong type");
        }
    }

    const json* sub(const std::string& key) {
        if (!has(key)) return nullptr;
        return &j.at(key);
    }

    void finish() const {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!seen.count(it.key()))
                throw ConfigError("unknown config key '" + path + it.key() + "'");
    }
};

void parse_network(const json& j, sim::NetworkConfig& net) {
    Section s(j, "network.");
    std::string topology = net.feedforward() ? "feedforward" : "recurrent";
    s.get("topology", topology);
    if (topology == "feedforward")
        net.topology = sim::Topology::feedforward;
    else if (topology == "recurrent")
        net.topology = sim::Topology::recurrent;
    else
        throw ConfigError("network.topology must be 'feedforward' or 'recurrent'");

    std::string model = net.model == NeuronModel::lif ? "lif" : "adex";
    s.get("model", model);
    if (model == "lif")
        net.model = NeuronModel::lif;
    else if (model == "adex")
        net.model = NeuronModel::adex;
    else
        throw ConfigError("network.model must be 'lif' or 'adex'");

    s.get("n_in", net.n_in);
    s.get("n_hidden", net.n_hidden);
    s.get("n_out", net.n_out);

    // dimension: 0 = fixed one-step delays (weights only), positive integer =
    // spatial, "inf" = one free delay per synapse
    if (s.has("dimension")) {
        const json& d = j.at("dimension");
        if (d.is_string()) {
            if (d.get<std::string>() != "inf")
                throw ConfigError("network.dimension must be an integer or \"inf\"");
            net.delay_mode = sim::DelayMode::free_delays;
            net.dimension = 2;
        } else if (d.is_number_integer()) {
            int dim = d.get<int>();
            if (dim < 0) throw ConfigError("network.dimension must be >= 0 or \"inf\"");
            if (dim == 0) {
                net.delay_mode = sim::DelayMode::fixed;
                net.dimension = 2;
            } else {
                net.delay_mode = sim::DelayMode::spatial;
                net.dimension = dim;
            }
        } else {
            throw ConfigError("network.dimension must be an integer or \"inf\"");
        }
    }

    s.get("tortuous", net.tortuous);
    s.get("epsilon", net.epsilon);
    s.get("dt_ms", net.dt);
    s.get("t_end_ms", net.t_end);
    s.get("checkpoint_interval", net.checkpoint_interval);
    s.get("scale_factor", net.scale_factor);
    s.get("one_spike", net.one_spike);
    s.get("bias_hidden", net.bias_hidden);
    s.get("bias_out", net.bias_out);
    s.get("dvdt_plus_at_reset", net.dvdt_plus_at_reset);
    s.get("reset_tangent", net.reset_tangent);
    s.finish();
}

void parse_neuron(const json& j, NeuronParams& np) {
    Section s(j, "neuron.");
    s.get("tau_mem_ms", np.tau_mem);
    s.get("tau_syn_ms", np.tau_syn);
    s.get("tau_adapt_ms", np.tau_adapt);
    s.get("adapt_a", np.adapt_a);
    s.get("adapt_b", np.adapt_b);
    s.get("delta_t", np.delta_t);
    s.finish();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig rc;
    train::TrainConfig& tc = rc.train;
    Section root(j, "");

    if (root.has("task")) {
        std::string task = j.at("task").get<std::string>();
        if (task == "yinyang")
            tc.task = train::Task::yinyang;
        else if (task == "spikefile")
            tc.task = train::Task::spikefile;
        else
            throw ConfigError("task must be 'yinyang' or 'spikefile'");
    }

    if (const json* sub = root.sub("data")) {
        Section s(*sub, "data.");
        s.get("n_train", tc.n_train);
        s.get("n_test", tc.n_test);
        s.get("seed", tc.data_seed);
        s.get("t_window_ms", tc.t_window);
        s.get("train_path", tc.train_path);
        s.get("test_path", tc.test_path);
        s.finish();
    }
    if (const json* sub = root.sub("network")) parse_network(*sub, tc.net);
    if (const json* sub = root.sub("neuron")) parse_neuron(*sub, tc.net.neuron);
    if (const json* sub = root.sub("loss")) {
        Section s(*sub, "loss.");
        s.get("ttfs_beta", tc.ttfs.beta);
        s.get("ttfs_margin_ms", tc.ttfs.margin);
        s.finish();
    }
    if (const json* sub = root.sub("init")) {
        Section s(*sub, "init.");
        s.get("w1_mean", tc.init.w1_mean);
        s.get("w1_std", tc.init.w1_std);
        s.get("w2_mean", tc.init.w2_mean);
        s.get("w2_std", tc.init.w2_std);
        s.get("readout_std", tc.init.readout_std);
        s.get("pos_std", tc.init.pos_std);
        s.finish();
    }
    if (const json* sub = root.sub("optimizer")) {
        Section s(*sub, "optimizer.");
        s.get("adam_beta1", tc.adam.beta1);
        s.get("adam_beta2", tc.adam.beta2);
        s.get("adam_eps", tc.adam.eps);
        s.finish();
    }
    if (const json* sub = root.sub("schedule")) {
        Section s(*sub, "schedule.");
        s.get("lr", tc.sched.peak_lr);
        s.get("warmup_steps", tc.sched.warmup_steps);
        s.get("total_steps", tc.sched.total_steps);
        s.get("final_fraction", tc.sched.final_fraction);
        s.finish();
    }
    if (const json* sub = root.sub("training")) {
        Section s(*sub, "training.");
        s.get("epochs", tc.epochs);
        s.get("batch_size", tc.batch_size);
        s.get("lr_halving_retry", tc.lr_halving_retry);
        s.finish();
    }
    if (const json* sub = root.sub("sparsity")) {
        Section s(*sub, "sparsity.");
        std::string mode = "none";
        s.get("mode", mode);
        if (mode == "none")
            tc.sparsity.mode = train::SparsityMode::none;
        else if (mode == "dynamic")
            tc.sparsity.mode = train::SparsityMode::dynamic_prune;
        else if (mode == "static")
            tc.sparsity.mode = train::SparsityMode::static_prune;
        else
            throw ConfigError("sparsity.mode must be 'none', 'dynamic' or 'static'");
        s.get("sp", tc.sparsity.sp);
        s.finish();
    }
    if (const json* sub = root.sub("gradcheck")) {
        Section s(*sub, "gradcheck.");
        s.get("batch", rc.gradcheck.batch);
        s.get("h", rc.gradcheck.h);
        s.get("input_window_ms", rc.gradcheck.input_window);
        s.get("events_per_input", rc.gradcheck.events_per_input);
        s.finish();
    }
    root.finish();

    tc.net.validate();
    tc.ttfs.validate();
    if (tc.epochs < 1 || tc.batch_size < 1)
        throw ConfigError("training.epochs and training.batch_size must be >= 1");
    if (!(tc.sparsity.sp >= 0.0 && tc.sparsity.sp <= 1.0))
        throw ConfigError("sparsity.sp must lie in [0,1]");
    if (tc.task == train::Task::spikefile && (tc.train_path.empty() || tc.test_path.empty()))
        throw ConfigError("spikefile task needs data.train_path and data.test_path");
    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string resolved_json(const RunConfig& rc) {
    const train::TrainConfig& tc = rc.train;
    const sim::NetworkConfig& net = tc.net;
    json j;
    j["task"] = tc.task == train::Task::yinyang ? "yinyang" : "spikefile";
    j["data"] = {{"n_train", tc.n_train},     {"n_test", tc.n_test},
                 {"seed", tc.data_seed},      {"t_window_ms", tc.t_window},
                 {"train_path", tc.train_path}, {"test_path", tc.test_path}};
    json dim;
    if (net.delay_mode == sim::DelayMode::fixed)
        dim = 0;
    else if (net.delay_mode == sim::DelayMode::free_delays)
        dim = "inf";
    else
        dim = net.dimension;
    j["network"] = {{"topology", net.feedforward() ? "feedforward" : "recurrent"},
                    {"model", net.model == NeuronModel::lif ? "lif" : "adex"},
                    {"n_in", net.n_in},
                    {"n_hidden", net.n_hidden},
                    {"n_out", net.n_out},
                    {"dimension", dim},
                    {"tortuous", net.tortuous},
                    {"epsilon", net.epsilon},
                    {"dt_ms", net.dt},
                    {"t_end_ms", net.t_end},
                    {"checkpoint_interval", net.checkpoint_interval},
                    {"scale_factor", net.scale_factor},
                    {"one_spike", net.one_spike},
                    {"bias_hidden", net.bias_hidden},
                    {"bias_out", net.bias_out},
                    {"dvdt_plus_at_reset", net.dvdt_plus_at_reset},
                    {"reset_tangent", net.reset_tangent}};
    j["neuron"] = {{"tau_mem_ms", net.neuron.tau_mem},   {"tau_syn_ms", net.neuron.tau_syn},
                   {"tau_adapt_ms", net.neuron.tau_adapt}, {"adapt_a", net.neuron.adapt_a},
                   {"adapt_b", net.neuron.adapt_b},      {"delta_t", net.neuron.delta_t}};
    j["loss"] = {{"ttfs_beta", tc.ttfs.beta}, {"ttfs_margin_ms", tc.ttfs.margin}};
    j["init"] = {{"w1_mean", tc.init.w1_mean}, {"w1_std", tc.init.w1_std},
                 {"w2_mean", tc.init.w2_mean}, {"w2_std", tc.init.w2_std},
                 {"readout_std", tc.init.readout_std}, {"pos_std", tc.init.pos_std}};
    j["optimizer"] = {{"adam_beta1", tc.adam.beta1},
                      {"adam_beta2", tc.adam.beta2},
                      {"adam_eps", tc.adam.eps}};
    j["schedule"] = {{"lr", tc.sched.peak_lr},
                     {"warmup_steps", tc.sched.warmup_steps},
                     {"total_steps", tc.sched.total_steps},
                     {"final_fraction", tc.sched.final_fraction}};
    j["training"] = {{"epochs", tc.epochs},
                     {"batch_size", tc.batch_size},
                     {"lr_halving_retry", tc.lr_halving_retry}};
    std::string mode = "none";
    if (tc.sparsity.mode == train::SparsityMode::dynamic_prune) mode = "dynamic";
    if (tc.sparsity.mode == train::SparsityMode::static_prune) mode = "static";
    j["sparsity"] = {{"mode", mode}, {"sp", tc.sparsity.sp}};
    j["gradcheck"] = {{"batch", rc.gradcheck.batch},
                      {"h", rc.gradcheck.h},
                      {"input_window_ms", rc.gradcheck.input_window},
                      {"events_per_input", rc.gradcheck.events_per_input}};
    return j.dump(2) + "\n";
}

}  // namespace spsnn::config

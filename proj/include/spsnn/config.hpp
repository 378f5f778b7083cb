#pragma once

#include <string>

#include "spsnn/trainer.hpp"

namespace spsnn::config {

// Gradient-check settings (cmd_gradcheck); the finite-difference oracle runs
// on the configured network with randomized parameters and inputs.
struct GradcheckSpec {
    int batch = 8;
    double h = 1e-4;
    double input_window = 5.0;  // ms, random input spike window
    int events_per_input = 1;
};

struct RunConfig {
    train::TrainConfig train;
    GradcheckSpec gradcheck;
};

// Parse a config file. Unknown keys are rejected with the offending key named;
// all keys are optional and default to the values documented in the README.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);

// Serialize the fully-resolved configuration (defaults filled in).
std::string resolved_json(const RunConfig& rc);

}  // namespace spsnn::config

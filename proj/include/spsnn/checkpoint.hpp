#pragma once

#include <string>

#include "spsnn/simulator.hpp"

namespace spsnn::io {

// Versioned binary model container ("SPNN"): magic, u32 version, u32 array
// count, then per array: u32 name length, name bytes, u8 dtype tag (0 = f64),
// u8 rank, u64 dims, row-major payload. Little-endian. Empty blocks are
// skipped on save and left empty on load.
void save_model(const std::string& path, const sim::ParamSet& p);
sim::ParamSet load_model(const std::string& path);

}  // namespace spsnn::io

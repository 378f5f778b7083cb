#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spsnn/common.hpp"
#include "spsnn/simulator.hpp"

namespace spsnn::data {

// Yin-Yang geometry: big circle radius 0.5 centered at (0.5, 0.5), half-disks of
// radius 0.25 along the horizontal midline, dots of radius R/6 at (0.25, 0.5)
// and (0.75, 0.5). Labels: 0 = yin, 1 = yang, 2 = dot.
struct YinYangSample {
    double x = 0.0, y = 0.0;
    int label = 0;
};

int yinyang_class(double x, double y);

// Class-balanced rejection sampling over the unit square; counts differ by at
// most one. Pure in (n, seed).
std::vector<YinYangSample> generate_yinyang(int n, std::uint64_t seed);

// 5 input neurons: x, y, 1-x, 1-y spike at value * t_window; bias neuron 4 at 0.
sim::Sample encode_yy(const YinYangSample& s, double t_window);

std::vector<sim::Sample> encode_yy_all(const std::vector<YinYangSample>& v, double t_window);

// Portable binary spike-event container ("SPKF"). Little-endian layout:
//   magic "SPKF", version u16, n_neurons u32, n_samples u32, n_classes u16
//   per sample: label u16, count u32, count x { neuron_id u32, time_ms f32 }
struct SpikeFileError : std::runtime_error {
    std::size_t offset;
    SpikeFileError(std::size_t off, const std::string& msg)
        : std::runtime_error(msg + " (byte offset " + std::to_string(off) + ")"), offset(off) {}
};

struct SpikeDataset {
    std::uint32_t n_neurons = 0;
    std::uint16_t n_classes = 0;
    struct Rec {
        std::uint16_t label = 0;
        std::vector<std::pair<std::uint32_t, float>> events;  // (neuron_id, time_ms)
    };
    std::vector<Rec> samples;
};

std::vector<unsigned char> serialize_spike_dataset(const SpikeDataset& ds);
SpikeDataset parse_spike_buffer(const std::vector<unsigned char>& buf);

void write_spike_file(const std::string& path, const SpikeDataset& ds);
SpikeDataset read_spike_file(const std::string& path);

sim::Sample to_sample(const SpikeDataset::Rec& rec);
std::vector<sim::Sample> to_samples(const SpikeDataset& ds);

}  // namespace spsnn::data

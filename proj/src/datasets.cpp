#include "spsnn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "spsnn/rng.hpp"

namespace spsnn::data {

namespace {
constexpr double kR = 0.5;          // big circle radius
constexpr double kDotR = kR / 6.0;  // dot radius
constexpr double kCx = 0.5, kCy = 0.5;

double dist(double x, double y, double px, double py) {
    return std::sqrt((x - px) * (x - px) + (y - py) * (y - py));
}
}  // namespace

int yinyang_class(double x, double y) {
    double d_right = dist(x, y, kCx + kR / 2.0, kCy);
    double d_left = dist(x, y, kCx - kR / 2.0, kCy);
    if (d_right < kDotR || d_left < kDotR) return 2;
    bool crit1 = d_right <= kDotR;
    bool crit2 = d_left > kDotR && d_left <= 0.5 * kR;
    bool crit3 = y > kCy && d_right > 0.5 * kR;
    bool is_yin = crit1 || crit2 || crit3;
    return is_yin ? 0 : 1;
}

std::vector<YinYangSample> generate_yinyang(int n, std::uint64_t seed) {
    if (n <= 0) throw ConfigError("yin-yang: n must be positive");
    Rng rng(Rng::derive(seed, 101));
    std::vector<YinYangSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        int want = i % 3;
        for (;;) {
            double x = rng.uniform(), y = rng.uniform();
            if (yinyang_class(x, y) == want) {
                out.push_back({x, y, want});
                break;
            }
        }
    }
    return out;
}

sim::Sample encode_yy(const YinYangSample& s, double t_window) {
    sim::Sample smp;
    smp.label = s.label;
    smp.events = {{0, s.x * t_window},
                  {1, s.y * t_window},
                  {2, (1.0 - s.x) * t_window},
                  {3, (1.0 - s.y) * t_window},
                  {4, 0.0}};
    std::stable_sort(smp.events.begin(), smp.events.end(),
                     [](const sim::InputEvent& a, const sim::InputEvent& b) { return a.t < b.t; });
    return smp;
}

std::vector<sim::Sample> encode_yy_all(const std::vector<YinYangSample>& v, double t_window) {
    std::vector<sim::Sample> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(encode_yy(s, t_window));
    return out;
}

namespace {

void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
}
void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) b.push_back((v >> (8 * k)) & 0xff);
}
void put_f32(std::vector<unsigned char>& b, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(b, u);
}

struct Reader {
    const std::vector<unsigned char>& b;
    std::size_t off = 0;

    void need(std::size_t n, const char* what) const {
        if (off + n > b.size()) throw SpikeFileError(off, std::string("truncated ") + what);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = b[off] | (std::uint16_t(b[off + 1]) << 8);
        off += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t(b[off + k]) << (8 * k);
        off += 4;
        return v;
    }
    float f32(const char* what) {
        std::uint32_t u = u32(what);
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
};

void validate_dataset(const SpikeDataset& ds) {
    for (const auto& rec : ds.samples) {
        if (ds.n_classes > 0 && rec.label >= ds.n_classes)
            throw ConfigError("spike dataset: label out of range");
        std::vector<float> last(ds.n_neurons, -1.0f);
        for (const auto& [nid, t] : rec.events) {
            if (nid >= ds.n_neurons) throw ConfigError("spike dataset: neuron id out of range");
            if (!(t >= 0.0f) || !std::isfinite(t))
                throw ConfigError("spike dataset: negative or non-finite time");
            if (t < last[nid]) throw ConfigError("spike dataset: per-neuron times decrease");
            last[nid] = t;
        }
    }
}

}  // namespace

std::vector<unsigned char> serialize_spike_dataset(const SpikeDataset& ds) {
    validate_dataset(ds);
    std::vector<unsigned char> b;
    b.push_back('S');
    b.push_back('P');
    b.push_back('K');
    b.push_back('F');
    put_u16(b, 1);
    put_u32(b, ds.n_neurons);
    put_u32(b, static_cast<std::uint32_t>(ds.samples.size()));
    put_u16(b, ds.n_classes);
    for (const auto& rec : ds.samples) {
        put_u16(b, rec.label);
        put_u32(b, static_cast<std::uint32_t>(rec.events.size()));
        for (const auto& [nid, t] : rec.events) {
            put_u32(b, nid);
            put_f32(b, t);
        }
    }
    return b;
}

SpikeDataset parse_spike_buffer(const std::vector<unsigned char>& buf) {
    Reader r{buf};
    r.need(4, "magic");
    if (std::memcmp(buf.data(), "SPKF", 4) != 0) throw SpikeFileError(0, "bad magic");
    r.off = 4;
    std::uint16_t version = r.u16("version");
    if (version != 1) throw SpikeFileError(4, "unsupported version " + std::to_string(version));
    SpikeDataset ds;
    std::size_t n_neurons_off = r.off;
    ds.n_neurons = r.u32("n_neurons");
    if (ds.n_neurons > (1u << 24))
        throw SpikeFileError(n_neurons_off, "n_neurons exceeds the supported maximum (2^24)");
    std::uint32_t n_samples = r.u32("n_samples");
    ds.n_classes = r.u16("n_classes");

    std::vector<float> last(ds.n_neurons);
    ds.samples.reserve(std::min<std::uint32_t>(n_samples, 1u << 20));
    for (std::uint32_t i = 0; i < n_samples; ++i) {
        SpikeDataset::Rec rec;
        std::size_t label_off = r.off;
        rec.label = r.u16("sample label");
        if (ds.n_classes > 0 && rec.label >= ds.n_classes)
            throw SpikeFileError(label_off, "label out of range");
        std::uint32_t count = r.u32("event count");
        // 8 bytes per event; reject counts the remaining buffer cannot hold
        if (static_cast<std::size_t>(count) * 8 > buf.size() - r.off)
            throw SpikeFileError(r.off - 4, "event count exceeds file size");
        rec.events.reserve(count);
        std::fill(last.begin(), last.end(), -1.0f);
        for (std::uint32_t e = 0; e < count; ++e) {
            std::size_t ev_off = r.off;
            std::uint32_t nid = r.u32("event neuron id");
            float t = r.f32("event time");
            if (nid >= ds.n_neurons) throw SpikeFileError(ev_off, "neuron id out of range");
            if (!(t >= 0.0f) || !std::isfinite(t))
                throw SpikeFileError(ev_off + 4, "negative or non-finite time");
            if (t < last[nid]) throw SpikeFileError(ev_off + 4, "per-neuron times decrease");
            last[nid] = t;
            rec.events.emplace_back(nid, t);
        }
        ds.samples.push_back(std::move(rec));
    }
    if (r.off != buf.size()) throw SpikeFileError(r.off, "trailing bytes after last sample");
    return ds;
}

void write_spike_file(const std::string& path, const SpikeDataset& ds) {
    std::vector<unsigned char> b = serialize_spike_dataset(ds);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ConfigError("cannot open for writing: " + path);
    std::size_t w = std::fwrite(b.data(), 1, b.size(), f);
    std::fclose(f);
    if (w != b.size()) throw ConfigError("short write: " + path);
}

SpikeDataset read_spike_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("cannot open: " + path);
    std::fseek(f, 0, SEEK_END);
    long sz = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<unsigned char> b(sz > 0 ? static_cast<std::size_t>(sz) : 0);
    if (sz > 0 && std::fread(b.data(), 1, b.size(), f) != b.size()) {
        std::fclose(f);
        throw ConfigError("short read: " + path);
    }
    std::fclose(f);
    return parse_spike_buffer(b);
}

sim::Sample to_sample(const SpikeDataset::Rec& rec) {
    sim::Sample s;
    s.label = rec.label;
    s.events.reserve(rec.events.size());
    for (const auto& [nid, t] : rec.events)
        s.events.push_back({static_cast<int>(nid), static_cast<double>(t)});
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const sim::InputEvent& a, const sim::InputEvent& b) { return a.t < b.t; });
    return s;
}

std::vector<sim::Sample> to_samples(const SpikeDataset& ds) {
    std::vector<sim::Sample> out;
    out.reserve(ds.samples.size());
    for (const auto& rec : ds.samples) out.push_back(to_sample(rec));
    return out;
}

}  // namespace spsnn::data

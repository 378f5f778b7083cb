#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "spsnn/datasets.hpp"
#include "spsnn/rng.hpp"

using namespace spsnn;
using namespace spsnn::data;

namespace {

// independent geometric oracle: region decomposition around the midline
int oracle_class(double x, double y) {
    auto d = [](double ax, double ay, double bx, double by) {
        return std::hypot(ax - bx, ay - by);
    };
    const double R = 0.5, dot_r = R / 6.0;
    double dl = d(x, y, 0.25, 0.5), dr = d(x, y, 0.75, 0.5);
    if (dl < dot_r || dr < dot_r) return 2;
    bool in_left_disk = dl <= R / 2.0;
    bool in_right_disk = dr <= R / 2.0;
    bool upper = y > 0.5;
    bool yin = in_left_disk || (upper && !in_right_disk) || (dr <= dot_r);
    return yin ? 0 : 1;
}

}  // namespace

TEST_CASE("yin-yang: dot centers are labeled dot") {
    CHECK(yinyang_class(0.25, 0.5) == 2);
    CHECK(yinyang_class(0.75, 0.5) == 2);
    CHECK(oracle_class(0.25, 0.5) == 2);
    CHECK(oracle_class(0.75, 0.5) == 2);
}

TEST_CASE("yin-yang: midline boundary points follow the half-disk rule") {
    // top of the plane, far from both dots: yin
    CHECK(yinyang_class(0.5, 0.95) == 0);
    CHECK(oracle_class(0.5, 0.95) == 0);
    // bottom: yang
    CHECK(yinyang_class(0.5, 0.05) == 1);
    CHECK(oracle_class(0.5, 0.05) == 1);
    // inside the left half-disk below the midline: yin (the hook)
    CHECK(yinyang_class(0.25, 0.35) == 0);
    CHECK(oracle_class(0.25, 0.35) == 0);
    // inside the right half-disk above the midline: yang
    CHECK(yinyang_class(0.75, 0.65) == 1);
    CHECK(oracle_class(0.75, 0.65) == 1);
}

TEST_CASE("yin-yang classifier agrees with the independent oracle") {
    Rng rng(55);
    for (int k = 0; k < 20000; ++k) {
        double x = rng.uniform(), y = rng.uniform();
        CHECK(yinyang_class(x, y) == oracle_class(x, y));
    }
}

TEST_CASE("generate_yinyang balances classes and is pure in (n, seed)") {
    auto a = generate_yinyang(3000, 7);
    int counts[3] = {0, 0, 0};
    for (const auto& s : a) {
        ++counts[s.label];
        CHECK(yinyang_class(s.x, s.y) == s.label);
    }
    CHECK(counts[0] == 1000);
    CHECK(counts[1] == 1000);
    CHECK(counts[2] == 1000);

    auto b = generate_yinyang(3000, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].x == b[k].x);
        CHECK(a[k].y == b[k].y);
    }
    // counts differ by at most one when n is not divisible by 3
    auto c = generate_yinyang(3001, 9);
    int c2[3] = {0, 0, 0};
    for (const auto& s : c) ++c2[s.label];
    CHECK(std::abs(c2[0] - c2[1]) <= 1);
    CHECK(std::abs(c2[1] - c2[2]) <= 1);
}

TEST_CASE("encode_yy: five input spikes with the mirrored-coordinate scheme") {
    YinYangSample s{0.0, 0.4, 1};
    sim::Sample enc = encode_yy(s, 10.0);
    CHECK(enc.events.size() == 5);
    CHECK(enc.label == 1);
    double t_of[5];
    for (const auto& ev : enc.events) t_of[ev.neuron] = ev.t;
    CHECK(t_of[0] == 0.0);                       // x = 0 -> t = 0
    CHECK(t_of[1] == doctest::Approx(4.0));      // y
    CHECK(t_of[2] == doctest::Approx(10.0));     // 1-x at the window end
    CHECK(t_of[3] == doctest::Approx(6.0));      // 1-y
    CHECK(t_of[4] == 0.0);                       // bias always at 0
    for (std::size_t k = 1; k < enc.events.size(); ++k)
        CHECK(enc.events[k - 1].t <= enc.events[k].t);
}

TEST_CASE("spike file: empty dataset round-trips") {
    SpikeDataset ds;
    ds.n_neurons = 3;
    ds.n_classes = 2;
    auto buf = serialize_spike_dataset(ds);
    SpikeDataset back = parse_spike_buffer(buf);
    CHECK(back.n_neurons == 3);
    CHECK(back.n_classes == 2);
    CHECK(back.samples.empty());
    CHECK(serialize_spike_dataset(back) == buf);
}

TEST_CASE("spike file: random datasets round-trip byte-identically") {
    Rng rng(77);
    for (int rep = 0; rep < 60; ++rep) {
        SpikeDataset ds;
        ds.n_neurons = 1 + static_cast<std::uint32_t>(rng.integer(40));
        ds.n_classes = 1 + static_cast<std::uint16_t>(rng.integer(9));
        int n_samples = static_cast<int>(rng.integer(12));
        for (int s = 0; s < n_samples; ++s) {
            SpikeDataset::Rec rec;
            rec.label = static_cast<std::uint16_t>(rng.integer(ds.n_classes));
            int n_ev = static_cast<int>(rng.integer(30));
            std::vector<float> last(ds.n_neurons, 0.0f);
            for (int e = 0; e < n_ev; ++e) {
                std::uint32_t nid = static_cast<std::uint32_t>(rng.integer(ds.n_neurons));
                last[nid] += static_cast<float>(rng.uniform(0.0, 5.0));
                rec.events.emplace_back(nid, last[nid]);
            }
            ds.samples.push_back(std::move(rec));
        }
        auto buf = serialize_spike_dataset(ds);
        SpikeDataset back = parse_spike_buffer(buf);
        CHECK(serialize_spike_dataset(back) == buf);
    }
}

TEST_CASE("spike file: truncations and corruptions give structured errors") {
    SpikeDataset ds;
    ds.n_neurons = 4;
    ds.n_classes = 3;
    SpikeDataset::Rec rec;
    rec.label = 1;
    rec.events = {{0, 1.0f}, {2, 2.5f}, {0, 3.0f}};
    ds.samples.push_back(rec);
    auto buf = serialize_spike_dataset(ds);

    // every strict prefix fails with an offset within bounds
    for (std::size_t cut = 0; cut < buf.size(); ++cut) {
        std::vector<unsigned char> t(buf.begin(), buf.begin() + cut);
        CHECK_THROWS_AS(parse_spike_buffer(t), SpikeFileError);
        try {
            parse_spike_buffer(t);
        } catch (const SpikeFileError& e) {
            CHECK(e.offset <= t.size());
        }
    }

    // bad magic
    auto bad = buf;
    bad[0] = 'X';
    CHECK_THROWS_AS(parse_spike_buffer(bad), SpikeFileError);

    // neuron id out of range
    bad = buf;
    bad[16 + 6] = 9;  // first event's neuron id low byte
    CHECK_THROWS_AS(parse_spike_buffer(bad), SpikeFileError);

    // event count beyond the file size
    bad = buf;
    bad[16 + 2] = 0xff;
    bad[16 + 3] = 0xff;
    CHECK_THROWS_AS(parse_spike_buffer(bad), SpikeFileError);

    // trailing junk
    bad = buf;
    bad.push_back(0);
    CHECK_THROWS_AS(parse_spike_buffer(bad), SpikeFileError);
}

TEST_CASE("spike file fuzz: random bytes never crash or overread") {
    Rng rng(99);
    long parsed = 0;
    for (int rep = 0; rep < 2000; ++rep) {
        std::vector<unsigned char> buf(rng.integer(200));
        for (auto& b : buf) b = static_cast<unsigned char>(rng.integer(256));
        if (rep % 3 == 0 && buf.size() >= 4) {
            buf[0] = 'S'; buf[1] = 'P'; buf[2] = 'K'; buf[3] = 'F';
        }
        try {
            parse_spike_buffer(buf);
            ++parsed;
        } catch (const SpikeFileError&) {
        }
    }
    CHECK(parsed >= 0);  // reaching here means no crash
}

TEST_CASE("to_sample keeps events time-sorted") {
    SpikeDataset::Rec rec;
    rec.label = 2;
    rec.events = {{3, 5.0f}, {1, 1.0f}, {3, 6.0f}, {0, 0.5f}};
    sim::Sample s = to_sample(rec);
    CHECK(s.label == 2);
    for (std::size_t k = 1; k < s.events.size(); ++k)
        CHECK(s.events[k - 1].t <= s.events[k].t);
}

#include "spsnn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <vector>

namespace spsnn::io {

namespace {

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) b.push_back((v >> (8 * k)) & 0xff);
}

void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) b.push_back((v >> (8 * k)) & 0xff);
}

void put_f64(std::vector<unsigned char>& b, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(b, u);
}

struct Reader {
    const std::vector<unsigned char>& b;
    std::size_t off = 0;
    void need(std::size_t n) const {
        if (off + n > b.size()) throw ConfigError("truncated model file");
    }
    std::uint8_t u8() {
        need(1);
        return b[off++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t(b[off + k]) << (8 * k);
        off += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= std::uint64_t(b[off + k]) << (8 * k);
        off += 8;
        return v;
    }
    double f64() {
        std::uint64_t u = u64();
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b.data() + off), n);
        off += n;
        return s;
    }
};

}  // namespace

void save_model(const std::string& path, const sim::ParamSet& p) {
    std::vector<unsigned char> b;
    b.push_back('S');
    b.push_back('P');
    b.push_back('N');
    b.push_back('N');
    put_u32(b, 1);
    std::uint32_t count = 0;
    p.for_each_block([&](const char*, const Mat& m) { count += !m.empty(); });
    put_u32(b, count);
    p.for_each_block([&](const char* name, const Mat& m) {
        if (m.empty()) return;
        std::uint32_t nl = static_cast<std::uint32_t>(std::strlen(name));
        put_u32(b, nl);
        b.insert(b.end(), name, name + nl);
        b.push_back(0);  // dtype f64
        b.push_back(2);  // rank
        put_u64(b, m.rows);
        put_u64(b, m.cols);
        for (double x : m.a) put_f64(b, x);
    });
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ConfigError("cannot open for writing: " + path);
    std::size_t w = std::fwrite(b.data(), 1, b.size(), f);
    std::fclose(f);
    if (w != b.size()) throw ConfigError("short write: " + path);
}

sim::ParamSet load_model(const std::string& path) {
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

    Reader r{b};
    r.need(4);
    if (std::memcmp(b.data(), "SPNN", 4) != 0) throw ConfigError("bad model magic");
    r.off = 4;
    std::uint32_t version = r.u32();
    if (version != 1) throw ConfigError("unsupported model version");
    std::uint32_t count = r.u32();

    sim::ParamSet p;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::uint32_t nl = r.u32();
        if (nl > 256) throw ConfigError("model array name too long");
        std::string name = r.str(nl);
        std::uint8_t dtype = r.u8();
        std::uint8_t rank = r.u8();
        if (dtype != 0 || rank != 2) throw ConfigError("unsupported array encoding: " + name);
        std::uint64_t rows = r.u64(), cols = r.u64();
        if (rows * cols > (1ull << 32)) throw ConfigError("model array too large: " + name);
        Mat m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
        for (double& x : m.a) x = r.f64();
        bool placed = false;
        p.for_each_block([&](const char* bname, Mat& slot) {
            if (!placed && name == bname) {
                slot = std::move(m);
                placed = true;
            }
        });
        if (!placed) throw ConfigError("unknown model array: " + name);
    }
    return p;
}

}  // namespace spsnn::io

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace spsnn {

// Deterministic generator with fixed algorithms for every distribution we use.
// std::normal_distribution and friends are implementation-defined, which would
// break the byte-identical-runs guarantee across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ull : seed) {
        // warm up splitmix so nearby seeds decorrelate
        for (int k = 0; k < 4; ++k) next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (cached pair)
    double normal() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cache_ = r * std::sin(a);
        have_cache_ = true;
        return r * std::cos(a);
    }

    // uniform integer in [0, n)
    std::uint64_t integer(std::uint64_t n) {
        // rejection to avoid modulo bias
        std::uint64_t lim = ~0ull - ~0ull % n;
        std::uint64_t x = next_u64();
        while (x >= lim) x = next_u64();
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(integer(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // derive an independent stream, e.g. per purpose or per seed index
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0xd1b54a32d192ed03ull * (stream + 1)));
        return r.next_u64();
    }

  private:
    std::uint64_t state_;
    double cache_ = 0.0;
    bool have_cache_ = false;
};

}  // namespace spsnn

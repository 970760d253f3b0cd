#pragma once

#include <cstdint>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace netimpute {

// Philox4x32-10 counter-based generator (Salmon et al., 2011). A stream is
// addressed by (seed, purpose, index): the seed is the key, purpose/index are
// folded into the upper counter words. Streams are therefore independent and
// bit-reproducible regardless of scheduling, which is what lets parallel
// Monte Carlo replications pool into the exact same numbers as a serial run.

namespace rng_purpose {
inline constexpr std::uint32_t population = 1;
inline constexpr std::uint32_t links = 2;
inline constexpr std::uint32_t sampling = 3;
inline constexpr std::uint32_t split = 4;
inline constexpr std::uint32_t cv_pairs = 5;
inline constexpr std::uint32_t holdout = 6;
inline constexpr std::uint32_t outcome = 7;
}  // namespace rng_purpose

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derives the per-replication (or per-network) seed used by the Monte Carlo
// harness; exposed so tests can reproduce individual replications.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(master ^ splitmix64(a)) ^ splitmix64(b + 0x517CC1B727220A95ULL));
}

class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index = 0) {
        key_[0] = static_cast<std::uint32_t>(seed);
        key_[1] = static_cast<std::uint32_t>(seed >> 32);
        const std::uint64_t sid = splitmix64((static_cast<std::uint64_t>(purpose) << 32) ^ index);
        stream_[0] = static_cast<std::uint32_t>(sid);
        stream_[1] = static_cast<std::uint32_t>(sid >> 32);
    }

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // uniform on [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // standard normal, Box-Muller with cached second draw
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // unbiased integer on [0, n), Lemire's method
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t t = (0ULL - n) % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // sorted uniform subset of size k from {0,...,n-1} (partial Fisher-Yates)
    std::vector<int> sample_indices(int n, int k) {
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < k; ++i) {
            const int j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[i], idx[j]);
        }
        std::vector<int> out(idx.begin(), idx.begin() + k);
        std::sort(out.begin(), out.end());
        return out;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    void refill() {
        std::uint32_t c0 = static_cast<std::uint32_t>(block_);
        std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
        std::uint32_t c2 = stream_[0];
        std::uint32_t c3 = stream_[1];
        std::uint32_t k0 = key_[0];
        std::uint32_t k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = 0xD2511F53ULL * c0;
            const std::uint64_t p1 = 0xCD9E8D57ULL * c2;
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n1 = lo1;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            const std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9U;
            k1 += 0xBB67AE85U;
        }
        buf_[0] = c0; buf_[1] = c1; buf_[2] = c2; buf_[3] = c3;
        ++block_;
        pos_ = 0;
    }

    std::uint32_t key_[2];
    std::uint32_t stream_[2];
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace netimpute

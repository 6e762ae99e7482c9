#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace moseg {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// xoshiro256++ with hand-rolled distributions. The standard library's
/// distributions are implementation-defined, so everything random in this
/// project goes through this class to keep results bit-identical across
/// compilers and to allow cheap per-work-item derived streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : root_seed_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = s = splitmix64(s);
    }

    /// Independent stream for a work item; identical regardless of the order
    /// work items are processed in.
    Rng derive(std::uint64_t stream_id) const {
        return Rng(splitmix64(root_seed_ ^ splitmix64(stream_id ^ 0x517cc1b727220a95ULL)));
    }
    Rng derive(std::uint64_t a, std::uint64_t b) const { return derive(a).derive(b); }
    Rng derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return derive(a).derive(b).derive(c);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, bound), bound >= 1. Rejection sampling, no modulo bias.
    std::uint64_t uniform_index(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform double in [0, 1).
    double uniform_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform_double(double lo, double hi) { return lo + (hi - lo) * uniform_double(); }

    /// Standard normal via Box-Muller; the spare variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// k distinct values sampled uniformly from `candidates`, in ascending order.
    std::vector<int> sample_without_replacement(const std::vector<int>& candidates, int k);

private:
    static std::uint64_t rotl(std::uint64_t x, int s) { return (x << s) | (x >> (64 - s)); }

    std::uint64_t root_seed_;
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace moseg

#pragma once

#include <cmath>
#include <cstdint>

namespace codedlat {

// Counter-mode pseudo-random generator built on the splitmix64 finalizer.
// Unlike the std:: distributions, every draw here is a fixed arithmetic
// function of (key, counter), so streams are reproducible bit-for-bit
// across platforms and standard libraries. Sub-streams derived via fork()
// are independent of how many draws the parent has made, which keeps
// parallel replications identical to their serial counterparts.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ull)) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free would bias tiny n ranges negligibly; use rejection
        // to stay exactly uniform regardless of n.
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Independent child stream; deterministic in (parent key, tag).
    Rng fork(std::uint64_t tag) const { return Rng(mix(key_ ^ mix(tag + 0x9e3779b97f4a7c15ull))); }

    static std::uint64_t mix(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return x;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace codedlat

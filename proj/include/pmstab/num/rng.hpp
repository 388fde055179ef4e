#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "pmstab/num/normal.hpp"

namespace pmstab::num {

// Counter-based random stream. A stream is identified by (seed, label); the
// k-th draw is a pure function of (seed, label, k), so sequences are identical
// across platforms and independent of evaluation order. Sub-streams derived
// with different labels are decorrelated by the label hash.
//
// Copying a stream replays it: draws advance only the copy's own counter.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label)
        : seed_(seed), label_(label), key_(mix(seed ^ fnv1a(label))) {}

    RngStream derive(std::string_view sublabel) const {
        return RngStream(seed_, label_ + "/" + std::string(sublabel));
    }

    std::uint64_t seed() const { return seed_; }
    const std::string& label() const { return label_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    // Uniform on the open interval (0,1); never returns an endpoint, so the
    // value is safe to feed through normal_quantile.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the inverse-cdf transform (one uniform per draw).
    double next_normal() { return normal_quantile(next_uniform()); }

    bool next_bernoulli(double p) { return next_uniform() < p; }

    // Uniform index in [0, n).
    std::uint64_t next_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(n)) % n;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        return h;
    }

private:
    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::string label_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace pmstab::num

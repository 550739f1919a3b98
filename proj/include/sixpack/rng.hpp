#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "sixpack/core.hpp"

// Deterministic randomness. Every component derives its own stream from the
// root seed via splitmix64 over (seed, label, index), so runs reproduce
// bitwise and components can be reordered without perturbing each other.
//
// The engine is std::mt19937_64 (bit-exact across platforms); the mappings
// to floats are implemented here because the standard distributions are not
// guaranteed to produce identical streams across library versions.

namespace sixpack {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derive a child seed for a named component and index.
inline uint64_t derive_seed(uint64_t root, std::string_view label, uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ fnv1a(label)) ^ index);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    Rng(uint64_t root, std::string_view label, uint64_t index = 0)
        : engine_(derive_seed(root, label, index)) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // Rejection-free modulo bias is negligible for the ranges used here,
        // but keep it exact anyway.
        const uint64_t limit = n * (UINT64_MAX / n);
        uint64_t v;
        do { v = engine_(); } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    Vec3 normal_vec3() { return {normal(), normal(), normal()}; }

    /// Uniform direction on the unit sphere.
    Vec3 unit_vec3() {
        while (true) {
            const Vec3 v = normal_vec3();
            const double n = v.norm();
            if (n > 1e-12) return v / n;
        }
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        if (!is) throw IoError("Rng::deserialize: bad engine state");
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sixpack

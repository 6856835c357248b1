#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "perfguard/errors.hpp"

namespace perfguard {

/// splitmix64 step; used to derive independent sub-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed for a named sub-stream of a base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ (stream * 0xd1342543de82ef95ULL + 1));
}

/// Seeded random source. All distributions are hand-rolled on top of
/// std::mt19937_64: the engine is fully specified by the standard, while
/// std::*_distribution results are implementation-defined and would break
/// bit-identical reproducibility across toolchains.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1), 53 bits of mantissa.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, bound) via rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw Error("SeededRng::below: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % bound;
    }

    /// Box-Muller; consumes exactly two uniforms per call (no cached spare).
    double normal(double mean = 0.0, double sigma = 1.0) {
        const double u1 = 1.0 - uniform01(); // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * M_PI * u2);
    }

    /// Marsaglia-Tsang gamma sampler, shape > 0, unit scale.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw Error("SeededRng::gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = 1.0 - uniform01();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = 1.0 - uniform01();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    /// Dirichlet draw; result sums to 1.
    std::vector<double> dirichlet(std::span<const double> concentration) {
        std::vector<double> out(concentration.size());
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = gamma(concentration[i]);
            total += out[i];
        }
        if (total <= 0.0) { // astronomically unlikely; fall back to uniform
            const double flat = 1.0 / static_cast<double>(out.size());
            for (auto& v : out) v = flat;
            return out;
        }
        for (auto& v : out) v /= total;
        return out;
    }

    /// Draw `count` distinct indices from [0, population), in draw order.
    std::vector<std::size_t> pick_distinct(std::size_t population, std::size_t count) {
        if (count > population)
            throw Error("SeededRng::pick_distinct: count exceeds population");
        std::vector<std::size_t> pool(population);
        for (std::size_t i = 0; i < population; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(population - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace perfguard

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace capd {

/// Seeded random source with platform-independent draws.
///
/// The standard distributions are implementation-defined, which would make
/// golden files differ between standard libraries. All sampling goes through
/// this wrapper so a seed yields the same stream everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling removes modulo bias
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    /// Uniform integer in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Index drawn from unnormalised non-negative weights.
    template <typename Range>
    std::size_t categorical(const Range& weights) {
        double total = 0.0;
        for (auto w : weights) total += static_cast<double>(w);
        double u = uniform() * total;
        std::size_t last_positive = 0;
        std::size_t i = 0;
        for (auto w : weights) {
            const double wd = static_cast<double>(w);
            if (wd > 0.0) {
                if (u < wd) return i;
                u -= wd;
                last_positive = i;
            }
            ++i;
        }
        return last_positive;  // rounding fell off the end
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Independent child stream for work item `index`; used to keep parallel
    /// sampling deterministic regardless of thread count.
    static Rng split(std::uint64_t master_seed, std::uint64_t index) {
        return Rng(splitmix64(master_seed ^ splitmix64(index + 0x9e3779b97f4a7c15ULL)));
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace capd

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mhm {

/// Seeded generator whose value sequence is identical on every platform.
///
/// Only the raw mt19937_64 stream is standardized by C++, so the real-valued
/// draws are derived from it here rather than through <random> distributions.
class Rng {
public:
    static constexpr std::string_view algorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Independent generator derived from this seed and a stream id.
    static Rng derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace mhm

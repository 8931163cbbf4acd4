#pragma once

// Deterministic random source. std::mt19937_64 output is pinned by the
// standard, but the distribution adapters are not, so the uniform/normal
// transforms are spelled out here to keep runs bit-identical across
// toolchains.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace qpinn {

class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller without caching the second variate.
    double normal(double stddev = 1.0) {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return stddev * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace qpinn

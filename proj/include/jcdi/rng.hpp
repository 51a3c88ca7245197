#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace jcdi {

/// Deterministic counter-style RNG (splitmix64 core). All randomness in the
/// project flows through this type so that artifacts are bit-reproducible
/// across platforms and thread counts; the standard <random> distributions
/// are implementation-defined and are deliberately avoided.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller. Two uniforms per draw, no cached
    /// spare, so the stream position is a pure function of the draw count.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), u1 < 1
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
            const int64_t j = uniform_int(0, i);
            std::swap(v[i], v[static_cast<size_t>(j)]);
        }
    }

    /// Derives an independent sub-stream seed from (seed, stream). Used to
    /// give parallel workers (records, chains) their own generators so that
    /// results do not depend on scheduling order.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        Rng r(seed ^ (0xD1B54A32D192ED03ull * (stream + 0x632BE59BD9B4E019ull)));
        return r.next_u64();
    }

  private:
    uint64_t state_;
};

}  // namespace jcdi

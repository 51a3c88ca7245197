#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

namespace jcdi::fastmath {

/// Branch-free single-precision exp with ~2 ulp accuracy (cephes-style
/// polynomial). Pure arithmetic, so simd loops vectorize it; the double
/// overload stays on libm for the 64-bit gradient-check path.
inline float fast_exp(float x) {
    constexpr float log2e = 1.44269504088896341f;
    constexpr float c1 = 0.693359375f;
    constexpr float c2 = -2.12194440e-4f;
    x = std::min(88.0f, std::max(-87.0f, x));
    // round to nearest via the magic-number shift (default rounding mode)
    float k = x * log2e + 12582912.0f;
    k -= 12582912.0f;
    const float r = (x - k * c1) - k * c2;
    float p = 1.9875691500e-4f;
    p = p * r + 1.3981999507e-3f;
    p = p * r + 8.3334519073e-3f;
    p = p * r + 4.1665795894e-2f;
    p = p * r + 1.6666665459e-1f;
    p = p * r + 5.0000001201e-1f;
    p = p * r * r + r + 1.0f;
    const int32_t n = static_cast<int32_t>(k);
    const float two_n = std::bit_cast<float>((n + 127) << 23);
    return p * two_n;
}

inline double fast_exp(double x) { return std::exp(x); }

inline float fast_tanh(float x) {
    // tanh(x) = 1 - 2 / (exp(2x) + 1); saturation handled by the exp clamp
    return 1.0f - 2.0f / (fast_exp(2.0f * x) + 1.0f);
}

inline double fast_tanh(double x) { return std::tanh(x); }

}  // namespace jcdi::fastmath

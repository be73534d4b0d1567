#pragma once

// Counter-derived deterministic random streams. Every consumer derives an
// independent stream from (seed, purpose, a, b); a stream is a pure function
// of its key, so results never depend on evaluation order or parallelism.

#include <cstdint>

namespace rlvr {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t h, std::uint64_t x) {
    return mix64(h + 0x9E3779B97F4A7C15ull + (x << 1 | 1));
}

}  // namespace detail

// splitmix64 engine; statistically solid at simulation scale and trivially
// seedable from a derived key.
class Rng {
public:
    explicit Rng(std::uint64_t state) : state_(state) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        return detail::mix64(z);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Multiply-shift; bias is < 2^-32 for n < 2^32.
    std::uint64_t uniform_int(std::uint64_t n) {
#ifdef __SIZEOF_INT128__
        __extension__ using uint128 = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<uint128>(next_u64()) * n) >> 64);
#else
        return next_u64() % n;  // platforms without 128-bit multiply
#endif
    }

    // Approximate standard normal (Irwin-Hall sum of 12 uniforms). Only IEEE
    // add/sub on dyadic rationals, so values are exactly reproducible across
    // platforms, unlike libm-based transforms.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform01();
        return s - 6.0;
    }

private:
    std::uint64_t state_;
};

// Purpose tags keep unrelated streams decorrelated.
namespace stream {
inline constexpr std::uint64_t kTaskGen = 0x01;
inline constexpr std::uint64_t kSplit = 0x02;
inline constexpr std::uint64_t kPolicyInit = 0x03;
inline constexpr std::uint64_t kBatchSelect = 0x04;
inline constexpr std::uint64_t kRollout = 0x05;
inline constexpr std::uint64_t kBaselineInit = 0x06;
inline constexpr std::uint64_t kValSample = 0x07;
inline constexpr std::uint64_t kBiasCheck = 0x08;
}  // namespace stream

inline Rng make_stream(std::uint64_t seed, std::uint64_t purpose,
                       std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = detail::combine(0x243F6A8885A308D3ull, seed);
    h = detail::combine(h, purpose);
    h = detail::combine(h, a);
    h = detail::combine(h, b);
    return Rng(h);
}

}  // namespace rlvr

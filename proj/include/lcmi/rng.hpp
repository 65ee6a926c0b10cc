#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace lcmi {

// Philox4x32-10 (Salmon et al., SC'11). Stateless: the output block is a pure
// function of (key, counter), so each path owns an independent stream keyed
// by (seed, path) and indexed by step.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    static Block generate(Block ctr, std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
};

// Counter-based stream for one path.
class PathStream {
public:
    PathStream(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_lo_(static_cast<std::uint32_t>(path)),
          path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

    // Two uniforms in (0,1) with 53-bit resolution from block (step, slot).
    std::array<double, 2> uniforms(std::uint32_t step, std::uint32_t slot) const {
        const auto b = Philox4x32::generate({step, slot, path_lo_, path_hi_}, key_);
        const std::uint64_t a = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
        const std::uint64_t c = (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
        return {to_open01(a), to_open01(c)};
    }

    // Two independent standard normals (Box-Muller).
    std::array<double, 2> normals(std::uint32_t step, std::uint32_t slot) const {
        const auto u = uniforms(step, slot);
        const double r = std::sqrt(-2.0 * std::log(u[0]));
        const double a = 6.283185307179586476925286766559 * u[1];
        return {r * std::cos(a), r * std::sin(a)};
    }

private:
    static double to_open01(std::uint64_t x) { return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53; }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_, path_hi_;
};

}  // namespace lcmi

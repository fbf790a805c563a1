// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random number generation (Philox 4x32-10, Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3", SC 2011). Every draw is a
// pure function of (key, counter), so data-parallel consumers can address
// randomness by index and produce identical streams for any worker count.

#ifndef DOFSIM_RNG_HPP
#define DOFSIM_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace dofsim {

namespace detail {

inline constexpr uint32_t kPhiloxW32A = 0x9E3779B9u;
inline constexpr uint32_t kPhiloxW32B = 0xBB67AE85u;
inline constexpr uint32_t kPhiloxM4x32A = 0xD2511F53u;
inline constexpr uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void philox_round(std::array<uint32_t, 4>& ctr, const std::array<uint32_t, 2>& key) {
    const uint64_t p0 = static_cast<uint64_t>(kPhiloxM4x32A) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kPhiloxM4x32B) * ctr[2];
    const uint32_t lo0 = static_cast<uint32_t>(p0), hi0 = static_cast<uint32_t>(p0 >> 32);
    const uint32_t lo1 = static_cast<uint32_t>(p1), hi1 = static_cast<uint32_t>(p1 >> 32);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

/// One 128-bit Philox 4x32-10 block for the given counter and key.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> counter,
                                          std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        detail::philox_round(counter, key);
        if (round < 9) {
            key[0] += detail::kPhiloxW32A;
            key[1] += detail::kPhiloxW32B;
        }
    }
    return counter;
}

/// Finalizer from the splitmix64 generator; used to derive keys and
/// substream identities from user-facing seeds.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// A deterministic random stream addressed by (seed, stream id). Sequential
/// draws advance an internal 64-bit block counter; *_at accessors read a
/// disjoint counter lane so indexed access never collides with sequential
/// draws. Copying a stream copies its position.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}

    explicit RngStream(uint64_t seed, uint64_t stream = 0) {
        const uint64_t k = splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x51A5D1CE5ull));
        key_ = {static_cast<uint32_t>(k), static_cast<uint32_t>(k >> 32)};
    }

    /// Derives an independent stream; `tag` names the purpose (e.g. a stage
    /// of a pipeline) so call-site reordering cannot alias streams.
    RngStream child(uint64_t tag) const {
        RngStream c;
        const uint64_t base =
            (static_cast<uint64_t>(key_[1]) << 32) | static_cast<uint64_t>(key_[0]);
        const uint64_t k = splitmix64(base ^ splitmix64(tag));
        c.key_ = {static_cast<uint32_t>(k), static_cast<uint32_t>(k >> 32)};
        return c;
    }

    std::array<uint32_t, 4> next_block() { return block_at(counter_++, kSequentialLane); }

    uint32_t next_u32() { return next_block()[0]; }

    uint64_t next_u64() {
        const auto b = next_block();
        return (static_cast<uint64_t>(b[0]) << 32) | b[1];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return to_unit_double(next_block()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); n must be > 0.
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Standard normal via Box-Muller; one block per draw.
    double normal() { return to_normal(next_block()); }

    /// Indexed access: the value depends only on (stream identity, index),
    /// not on how many sequential draws have happened, so any number of
    /// workers can fill disjoint index ranges and agree bit-for-bit.
    double normal_at(uint64_t index) const { return to_normal(block_at(index, kIndexedLane)); }

    double uniform_at(uint64_t index) const {
        return to_unit_double(block_at(index, kIndexedLane));
    }

  private:
    static constexpr uint32_t kSequentialLane = 1;
    static constexpr uint32_t kIndexedLane = 2;

    std::array<uint32_t, 4> block_at(uint64_t index, uint32_t lane) const {
        const std::array<uint32_t, 4> ctr = {static_cast<uint32_t>(index),
                                             static_cast<uint32_t>(index >> 32), lane, 0};
        return philox4x32(ctr, key_);
    }

    static double to_unit_double(const std::array<uint32_t, 4>& b) {
        const uint64_t bits = (static_cast<uint64_t>(b[0]) << 32) | b[1];
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    static double to_normal(const std::array<uint32_t, 4>& b) {
        const uint64_t u1bits = (static_cast<uint64_t>(b[0]) << 32) | b[1];
        const uint64_t u2bits = (static_cast<uint64_t>(b[2]) << 32) | b[3];
        // 1 - u1 lies in (0, 1], keeping the log argument positive.
        const double u1 = 1.0 - static_cast<double>(u1bits >> 11) * 0x1.0p-53;
        const double u2 = static_cast<double>(u2bits >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        return radius * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::array<uint32_t, 2> key_;
    uint64_t counter_ = 0;
};

}  // namespace dofsim

#endif  // DOFSIM_RNG_HPP

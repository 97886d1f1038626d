#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/erf.hpp>  // erfc_inv

namespace amrmc {

/// Name of the variate-generation method, recorded in batch metadata.
/// Streams are a pure function of (base_seed, labels); changing either the
/// counter-mode generator or the uniform-to-normal transform is a breaking
/// change to the reproducibility contract.
inline constexpr std::string_view kGeneratorName = "philox4x32-10/icdf";

/// SplitMix64 finalizer, used to hash seed material into generator state.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Identifies a random sub-stream: a base seed plus a label path such as
/// (date index, batch index, cell index). Equal coordinates always produce
/// bit-identical streams.
struct SeedCoordinates {
    std::uint64_t base_seed = 0;
    std::vector<std::uint64_t> labels;

    SeedCoordinates with(std::uint64_t label) const {
        SeedCoordinates out = *this;
        out.labels.push_back(label);
        return out;
    }
    friend bool operator==(const SeedCoordinates&, const SeedCoordinates&) = default;
};

/// Standard normal inverse CDF. Routed through erfc_inv so the tail
/// probability reaches the special function without cancellation.
inline double normal_icdf(double p) {
    if (p < 0.5) return -1.4142135623730951 * boost::math::erfc_inv(2.0 * p);
    return 1.4142135623730951 * boost::math::erfc_inv(2.0 * (1.0 - p));
}

/// Counter-mode pseudo-random stream (Philox4x32-10). The key and a 64-bit
/// stream id are hashed from (base_seed, labels); the 128-bit counter is
/// (block index, stream id), so distinct label paths give independent
/// streams and output does not depend on generation order elsewhere.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t base_seed, std::span<const std::uint64_t> labels) {
        std::uint64_t h = mix64(base_seed + 0x243F6A8885A308D3ULL);
        for (std::uint64_t label : labels)
            h = mix64(h ^ mix64(label + 0x452821E638D01377ULL));
        const std::uint64_t key = mix64(h ^ 0x13198A2E03707344ULL);
        key_[0] = static_cast<std::uint32_t>(key);
        key_[1] = static_cast<std::uint32_t>(key >> 32);
        stream_id_ = mix64(h ^ 0xA4093822299F31D0ULL);
    }

    explicit PhiloxStream(const SeedCoordinates& seed)
        : PhiloxStream(seed.base_seed, seed.labels) {}

    std::uint64_t next_u64() {
        if (pos_ >= 4) refill();
        const std::uint64_t lo = buf_[pos_];
        const std::uint64_t hi = buf_[pos_ + 1];
        pos_ += 2;
        return lo | (hi << 32);
    }

    /// Uniform on the open interval (0, 1).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via the inverse CDF ("icdf" in the method name).
    double next_normal() { return normal_icdf(next_uniform()); }

private:
    void refill() {
        std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(block_),
            static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_id_),
            static_cast<std::uint32_t>(stream_id_ >> 32)};
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
            const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        buf_ = ctr;
        ++block_;
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t stream_id_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
};

/// Sub-stream derivation: output is a pure function of (base_seed, labels).
inline PhiloxStream derive_stream(std::uint64_t base_seed,
                                  std::span<const std::uint64_t> labels) {
    return PhiloxStream(base_seed, labels);
}

inline PhiloxStream derive_stream(const SeedCoordinates& seed) {
    return PhiloxStream(seed);
}

}  // namespace amrmc

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "syncsampler/tensor.hpp"

namespace syncsampler {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al., Random123).
PhiloxBlock philox4x32(PhiloxBlock counter, PhiloxKey key);

// What a draw is used for. Keeps streams for different purposes disjoint.
enum class NoisePurpose : std::uint32_t {
    Initial = 1,
    Step = 2,
    Blend = 3,
    SdsSchedule = 4,
    SdsNoise = 5,
    Corrupt = 6,
    Experiment = 7,
};

// Identifies one stream of draws. The draw index is the position inside the
// stream, so any element can be regenerated without touching the others.
struct NoiseKey {
    std::uint64_t seed = 0;
    NoisePurpose purpose = NoisePurpose::Step;
    std::uint32_t t = 0;
    std::uint32_t view = 0;
    std::uint32_t sub = 0;  // inner index (e.g. iteration); 24 bits
};

class NoiseStream {
public:
    explicit NoiseStream(NoiseKey key) : key_(key) {}

    const NoiseKey& key() const { return key_; }

    // Four raw words for block b.
    PhiloxBlock block(std::uint32_t b) const;
    // Uniform in (0, 1], 53 bits, draw index i.
    double uniform(std::uint64_t i) const;
    // Standard normal, draw index i (Box-Muller on a pair of uniforms).
    double normal(std::uint64_t i) const;
    void fill_normal(std::span<double> out) const;
    Tensor normal_tensor(const Shape& shape) const;
    // Uniform integer in [lo, hi], draw index i.
    std::int64_t uniform_int(std::uint64_t i, std::int64_t lo, std::int64_t hi) const;

private:
    NoiseKey key_;
};

}  // namespace syncsampler

#include "syncsampler/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace syncsampler {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t k = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
    return (static_cast<double>(k) + 1.0) * 0x1.0p-53;
}

}  // namespace

PhiloxBlock philox4x32(PhiloxBlock ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

PhiloxBlock NoiseStream::block(std::uint32_t b) const {
    const PhiloxKey key{static_cast<std::uint32_t>(key_.seed),
                        static_cast<std::uint32_t>(key_.seed >> 32)};
    const std::uint32_t tag =
        (static_cast<std::uint32_t>(key_.purpose) << 24) | (key_.sub & 0xFFFFFFu);
    return philox4x32({b, key_.view, key_.t, tag}, key);
}

double NoiseStream::uniform(std::uint64_t i) const {
    const PhiloxBlock r = block(static_cast<std::uint32_t>(i / 2));
    return (i % 2 == 0) ? to_unit(r[0], r[1]) : to_unit(r[2], r[3]);
}

double NoiseStream::normal(std::uint64_t i) const {
    const PhiloxBlock r = block(static_cast<std::uint32_t>(i / 2));
    const double u1 = to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (i % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

void NoiseStream::fill_normal(std::span<double> out) const {
    if (out.size() / 2 > 0xFFFFFFFFull)
        throw std::invalid_argument("fill_normal: stream too long");
    for (std::size_t b = 0; 2 * b < out.size(); ++b) {
        const PhiloxBlock r = block(static_cast<std::uint32_t>(b));
        const double radius = std::sqrt(-2.0 * std::log(to_unit(r[0], r[1])));
        const double angle = 2.0 * std::numbers::pi * to_unit(r[2], r[3]);
        out[2 * b] = radius * std::cos(angle);
        if (2 * b + 1 < out.size()) out[2 * b + 1] = radius * std::sin(angle);
    }
}

Tensor NoiseStream::normal_tensor(const Shape& shape) const {
    Tensor out(shape);
    fill_normal(out.values());
    return out;
}

std::int64_t NoiseStream::uniform_int(std::uint64_t i, std::int64_t lo, std::int64_t hi) const {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    const double u = uniform(i);  // (0, 1]
    auto k = static_cast<std::uint64_t>((1.0 - u) * static_cast<double>(span));
    if (k >= span) k = span - 1;
    return lo + static_cast<std::int64_t>(k);
}

}  // namespace syncsampler

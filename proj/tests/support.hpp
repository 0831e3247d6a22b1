#pragma once

#include <random>

#include "syncsampler/tensor.hpp"

namespace testsupport {

inline syncsampler::Tensor random_tensor(std::mt19937_64& gen, const syncsampler::Shape& shape, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    syncsampler::Tensor t(shape);
    for (auto& v : t.values()) v = n(gen);
    return t;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace testsupport

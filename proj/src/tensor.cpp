#include "syncsampler/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace syncsampler {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_))
        throw std::invalid_argument("tensor: " + std::to_string(values_.size()) +
                                    " values do not fill shape " + shape_string(shape_));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

Tensor lincomb(double a, const Tensor& x, double b, const Tensor& y) {
    require_same_shape(x, y, "lincomb");
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

Tensor scaled(double a, const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i];
    return out;
}

Tensor operator+(const Tensor& x, const Tensor& y) {
    require_same_shape(x, y, "add");
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return out;
}

Tensor operator-(const Tensor& x, const Tensor& y) {
    require_same_shape(x, y, "subtract");
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return out;
}

double dot(const Tensor& x, const Tensor& y) {
    require_same_shape(x, y, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double squared_norm(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    return s;
}

double squared_distance(const Tensor& x, const Tensor& y) {
    require_same_shape(x, y, "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

double max_abs_difference(const Tensor& x, const Tensor& y) {
    require_same_shape(x, y, "max_abs_difference");
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

bool all_finite(const Tensor& x) {
    for (double v : x.values())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace syncsampler

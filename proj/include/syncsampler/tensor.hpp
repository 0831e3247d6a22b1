#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace syncsampler {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Images are stored as H x W x C.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& storage() { return values_; }
    const std::vector<double>& storage() const { return values_; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// a*x + b*y
Tensor lincomb(double a, const Tensor& x, double b, const Tensor& y);
Tensor scaled(double a, const Tensor& x);
Tensor operator+(const Tensor& x, const Tensor& y);
Tensor operator-(const Tensor& x, const Tensor& y);

double dot(const Tensor& x, const Tensor& y);
double squared_norm(const Tensor& x);
double squared_distance(const Tensor& x, const Tensor& y);
double max_abs_difference(const Tensor& x, const Tensor& y);
bool all_finite(const Tensor& x);

// Thrown when a closed-form expression would divide by zero.
class SingularityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Thrown for invalid sampler or run configurations.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace syncsampler

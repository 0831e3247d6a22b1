#include "syncsampler/diffusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace syncsampler {

std::string to_string(SigmaPolicy policy) {
    switch (policy) {
        case SigmaPolicy::Zero: return "zero";
        case SigmaPolicy::DDPM: return "ddpm";
        case SigmaPolicy::Max: return "max";
    }
    return "?";
}

SigmaPolicy sigma_policy_from_string(const std::string& name) {
    if (name == "zero") return SigmaPolicy::Zero;
    if (name == "ddpm") return SigmaPolicy::DDPM;
    if (name == "max") return SigmaPolicy::Max;
    throw std::invalid_argument("unknown sigma policy: " + name);
}

double sigma(SigmaPolicy policy, double ab_t, double ab_prev) {
    switch (policy) {
        case SigmaPolicy::Zero: return 0.0;
        case SigmaPolicy::DDPM:
            return std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
        case SigmaPolicy::Max: return std::sqrt(1.0 - ab_prev);
    }
    return 0.0;
}

double sigma(SigmaPolicy policy, const Schedule& sched, int t, int t_prev) {
    if (t < 1 || t_prev < 0 || t_prev >= t)
        throw std::invalid_argument("sigma: need 0 <= t_prev < t");
    return sigma(policy, sched.alpha_bar(t), sched.alpha_bar(t_prev));
}

Tensor forward_sample(const Tensor& x0, const Tensor& eps, double ab) {
    return lincomb(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const Schedule& sched) {
    return forward_sample(x0, eps, sched.alpha_bar(t));
}

Tensor tweedie_x0(const Tensor& x_t, const Tensor& eps, double ab) {
    if (!(ab > 0.0)) throw SingularityError("tweedie_x0: alpha_bar = 0");
    require_same_shape(x_t, eps, "tweedie_x0");
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = (x_t[i] - b * eps[i]) / a;
    return out;
}

Tensor tweedie_x0(const Tensor& x_t, int t, const Tensor& eps, const Schedule& sched) {
    return tweedie_x0(x_t, eps, sched.alpha_bar(t));
}

Tensor eps_from_x0(const Tensor& x_t, const Tensor& x0, double ab) {
    if (!(ab < 1.0)) throw SingularityError("eps_from_x0: alpha_bar = 1");
    require_same_shape(x_t, x0, "eps_from_x0");
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = (x_t[i] - a * x0[i]) / b;
    return out;
}

Tensor eps_from_x0(const Tensor& x_t, int t, const Tensor& x0, const Schedule& sched) {
    return eps_from_x0(x_t, x0, sched.alpha_bar(t));
}

namespace {

// √(1−ᾱ_prev−σ²), tolerating the rounding left by σ = √(1−ᾱ_prev).
double eps_coefficient(double ab_prev, double sigma) {
    const double budget = 1.0 - ab_prev;
    const double r = budget - sigma * sigma;
    // Radicands within the rounding error of the subtraction are zero.
    const double tol = 16.0 * std::numeric_limits<double>::epsilon() * std::max(budget, 1e-300);
    if (std::abs(r) <= tol) return 0.0;
    if (r > 0.0) return std::sqrt(r);
    throw std::invalid_argument("ddim_mean: sigma^2 exceeds 1 - alpha_bar_prev");
}

}  // namespace

Tensor ddim_mean(const Tensor& x0, const Tensor& eps, double ab_prev, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("ddim_mean: negative sigma");
    return lincomb(std::sqrt(ab_prev), x0, eps_coefficient(ab_prev, sigma), eps);
}

Tensor ddim_posterior_mean(const Tensor& x0, const Tensor& x_t, double ab_t, double ab_prev,
                           double sigma) {
    if (!(ab_t < 1.0)) throw SingularityError("ddim_posterior_mean: alpha_bar_t = 1");
    require_same_shape(x0, x_t, "ddim_posterior_mean");
    const double c = eps_coefficient(ab_prev, sigma);
    const double a_prev = std::sqrt(ab_prev), a_t = std::sqrt(ab_t), b_t = std::sqrt(1.0 - ab_t);
    Tensor out(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i)
        out[i] = a_prev * x0[i] + c * ((x_t[i] - a_t * x0[i]) / b_t);
    return out;
}

Tensor max_sigma_mean(const Tensor& x0, double ab_prev) {
    return scaled(std::sqrt(ab_prev), x0);
}

Tensor ddim_step(const Tensor& x0t, const Tensor& eps, SigmaPolicy policy, const Schedule& sched,
                 int t, int t_prev, const NoiseStream& noise) {
    const double s = sigma(policy, sched, t, t_prev);
    Tensor out = ddim_mean(x0t, eps, sched.alpha_bar(t_prev), s);
    if (policy == SigmaPolicy::Zero) return out;
    Tensor g = noise.normal_tensor(out.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * g[i];
    return out;
}

}  // namespace syncsampler

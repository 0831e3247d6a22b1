#pragma once

#include <optional>
#include <string>

#include "syncsampler/gmm.hpp"
#include "syncsampler/schedule.hpp"
#include "syncsampler/tensor.hpp"

namespace syncsampler {

struct DenoiserQuery {
    Tensor x_t;
    int t = 0;
    std::optional<std::string> condition;
};

struct Prediction {
    Tensor eps;
    Tensor x0;
};

// Noise predictor ε_θ(x_t, y). Implementations must be safe to call
// concurrently.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual const Schedule& schedule() const = 0;
    virtual Prediction predict(const Tensor& x_t, int t) const = 0;

    Tensor eps(const Tensor& x_t, int t) const { return predict(x_t, t).eps; }
    Tensor x0(const Tensor& x_t, int t) const { return predict(x_t, t).x0; }
};

// Exact posterior of a Gaussian mixture. When the query is larger than the
// mixture dimension it is split into H x W x C patches of `patch` shape, each
// denoised independently.
class GmmDenoiser : public Denoiser {
public:
    GmmDenoiser(GaussianMixture gmm, Schedule sched,
                std::optional<std::string> condition = std::nullopt,
                std::optional<Shape> patch = std::nullopt);

    const Schedule& schedule() const override { return sched_; }
    Prediction predict(const Tensor& x_t, int t) const override;
    Prediction predict_at(const Tensor& x_t, double alpha_bar) const;

    const GaussianMixture& mixture() const { return gmm_; }

private:
    GaussianMixture gmm_;
    Schedule sched_;
    std::optional<std::string> condition_;
    std::optional<Shape> patch_;
};

// Mixture with every component restricted to a label; errors if empty.
GaussianMixture conditioned(const GaussianMixture& gmm, const std::optional<std::string>& condition);

}  // namespace syncsampler

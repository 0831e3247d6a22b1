#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncsampler/tensor.hpp"

namespace syncsampler {

struct MixtureComponent {
    double weight = 1.0;
    std::vector<double> mean;
    double variance = 1.0;  // isotropic; 0 means a point mass
    std::string label;
};

// Isotropic Gaussian mixture over flattened d-vectors.
class GaussianMixture {
public:
    explicit GaussianMixture(std::vector<MixtureComponent> components);

    std::size_t dim() const { return dim_; }
    std::span<const MixtureComponent> components() const { return components_; }

    // Components carrying `label`, weights renormalized.
    GaussianMixture restricted_to(const std::string& label) const;
    // Marginal over the listed coordinates.
    GaussianMixture marginal(std::span<const std::size_t> coords) const;

    static GaussianMixture from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::vector<MixtureComponent> components_;
    std::size_t dim_ = 0;
};

GaussianMixture load_gmm_file(const std::string& path);

// E[x0 | x_t] at noise level ᾱ, optionally restricted to a label.
Tensor gmm_posterior_x0(const GaussianMixture& gmm, const Tensor& x_t, double alpha_bar,
                        const std::optional<std::string>& condition = std::nullopt);

// eps_from_x0(x_t, gmm_posterior_x0(...)).
Tensor gmm_eps(const GaussianMixture& gmm, const Tensor& x_t, double alpha_bar,
               const std::optional<std::string>& condition = std::nullopt);

// Mean negative log-likelihood of clean samples under the mixture.
double gmm_score_nll(const GaussianMixture& gmm, std::span<const Tensor> samples);
double gmm_log_density(const GaussianMixture& gmm, std::span<const double> x);

}  // namespace syncsampler

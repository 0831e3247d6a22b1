#include "syncsampler/gmm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "syncsampler/diffusion.hpp"

namespace syncsampler {

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("gmm: no components");
    dim_ = components_.front().mean.size();
    if (dim_ == 0) throw std::invalid_argument("gmm: dimension must be >= 1");
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != dim_) throw std::invalid_argument("gmm: inconsistent mean dimensions");
        if (!(c.weight > 0.0) || !std::isfinite(c.weight))
            throw std::invalid_argument("gmm: weights must be positive");
        if (!(c.variance >= 0.0) || !std::isfinite(c.variance))
            throw std::invalid_argument("gmm: variances must be finite and >= 0");
        for (double m : c.mean)
            if (!std::isfinite(m)) throw std::invalid_argument("gmm: non-finite mean");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("gmm: weights sum to " + std::to_string(total) + ", not 1");
}

GaussianMixture GaussianMixture::restricted_to(const std::string& label) const {
    std::vector<MixtureComponent> kept;
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.label == label) {
            kept.push_back(c);
            total += c.weight;
        }
    }
    if (kept.empty()) throw std::invalid_argument("gmm: no components with label '" + label + "'");
    for (auto& c : kept) c.weight /= total;
    return GaussianMixture(std::move(kept));
}

GaussianMixture GaussianMixture::marginal(std::span<const std::size_t> coords) const {
    if (coords.empty()) throw std::invalid_argument("gmm marginal: no coordinates");
    std::vector<MixtureComponent> out = components_;
    for (auto& c : out) {
        std::vector<double> m;
        m.reserve(coords.size());
        for (std::size_t k : coords) {
            if (k >= dim_) throw std::invalid_argument("gmm marginal: coordinate out of range");
            m.push_back(c.mean[k]);
        }
        c.mean = std::move(m);
    }
    return GaussianMixture(std::move(out));
}

GaussianMixture GaussianMixture::from_json(const nlohmann::json& j) {
    std::vector<MixtureComponent> comps;
    for (const auto& c : j.at("components")) {
        MixtureComponent mc;
        mc.weight = c.at("weight").get<double>();
        mc.mean = c.at("mean").get<std::vector<double>>();
        mc.variance = c.at("var").get<double>();
        if (c.contains("label") && !c["label"].is_null()) mc.label = c["label"].get<std::string>();
        comps.push_back(std::move(mc));
    }
    GaussianMixture g(std::move(comps));
    if (j.contains("d") && j["d"].get<std::size_t>() != g.dim())
        throw std::invalid_argument("gmm: 'd' does not match component means");
    return g;
}

nlohmann::json GaussianMixture::to_json() const {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : components_)
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.variance}, {"label", c.label}});
    return {{"d", dim_}, {"components", comps}};
}

GaussianMixture load_gmm_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open GMM file: " + path);
    return GaussianMixture::from_json(nlohmann::json::parse(in));
}

namespace {

Tensor posterior_unconditioned(const GaussianMixture& gmm, const Tensor& x_t, double ab) {
    if (x_t.size() != gmm.dim())
        throw std::invalid_argument("gmm_posterior_x0: query has " + std::to_string(x_t.size()) +
                                    " entries, mixture dimension is " + std::to_string(gmm.dim()));
    if (ab >= 1.0) return x_t;
    const auto comps = gmm.components();
    const double a = std::sqrt(ab);
    const double d = static_cast<double>(gmm.dim());
    std::vector<double> logit(comps.size());
    std::vector<double> gain(comps.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& c = comps[i];
        const double v = ab * c.variance + (1.0 - ab);
        double r2 = 0.0;
        for (std::size_t k = 0; k < x_t.size(); ++k) {
            const double e = x_t[k] - a * c.mean[k];
            r2 += e * e;
        }
        logit[i] = std::log(c.weight) - 0.5 * d * std::log(v) - 0.5 * r2 / v;
        gain[i] = a * c.variance / v;
        top = std::max(top, logit[i]);
    }
    double z = 0.0;
    for (double& l : logit) {
        l = std::exp(l - top);
        z += l;
    }
    // Σ r_i (m_i + g_i (x − √ᾱ m_i)) = Σ r_i (1 − g_i √ᾱ) m_i + (Σ r_i g_i) x
    Tensor out(x_t.shape());
    double x_coef = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const double r = logit[i] / z;
        if (r == 0.0) continue;
        x_coef += r * gain[i];
        const double m_coef = r * (1.0 - gain[i] * a);
        const auto& m = comps[i].mean;
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += m_coef * m[k];
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += x_coef * x_t[k];
    return out;
}

}  // namespace

Tensor gmm_posterior_x0(const GaussianMixture& gmm, const Tensor& x_t, double ab,
                        const std::optional<std::string>& condition) {
    if (condition) return posterior_unconditioned(gmm.restricted_to(*condition), x_t, ab);
    return posterior_unconditioned(gmm, x_t, ab);
}

Tensor gmm_eps(const GaussianMixture& gmm, const Tensor& x_t, double ab,
               const std::optional<std::string>& condition) {
    return eps_from_x0(x_t, gmm_posterior_x0(gmm, x_t, ab, condition), ab);
}

double gmm_log_density(const GaussianMixture& gmm, std::span<const double> x) {
    if (x.size() != gmm.dim()) throw std::invalid_argument("gmm_log_density: dimension mismatch");
    const double d = static_cast<double>(gmm.dim());
    const auto comps = gmm.components();
    std::vector<double> logit(comps.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& c = comps[i];
        if (c.variance == 0.0) throw SingularityError("gmm_log_density: point-mass component");
        double r2 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double e = x[k] - c.mean[k];
            r2 += e * e;
        }
        logit[i] = std::log(c.weight) - 0.5 * d * std::log(2.0 * std::numbers::pi * c.variance) -
                   0.5 * r2 / c.variance;
        top = std::max(top, logit[i]);
    }
    double z = 0.0;
    for (double l : logit) z += std::exp(l - top);
    return top + std::log(z);
}

double gmm_score_nll(const GaussianMixture& gmm, std::span<const Tensor> samples) {
    if (samples.empty()) throw std::invalid_argument("gmm_score_nll: empty sample list");
    double total = 0.0;
    for (const auto& s : samples) total -= gmm_log_density(gmm, s.values());
    return total / static_cast<double>(samples.size());
}

}  // namespace syncsampler

#include "syncsampler/denoiser.hpp"

#include <stdexcept>

#include "syncsampler/diffusion.hpp"

namespace syncsampler {

GaussianMixture conditioned(const GaussianMixture& gmm, const std::optional<std::string>& condition) {
    return condition ? gmm.restricted_to(*condition) : gmm;
}

GmmDenoiser::GmmDenoiser(GaussianMixture gmm, Schedule sched, std::optional<std::string> condition,
                         std::optional<Shape> patch)
    : gmm_(conditioned(gmm, condition)),
      sched_(std::move(sched)),
      condition_(std::move(condition)),
      patch_(std::move(patch)) {
    if (patch_ && (patch_->size() != 3 || shape_size(*patch_) != gmm_.dim()))
        throw std::invalid_argument("GmmDenoiser: patch must be H x W x C with H*W*C = mixture dimension");
}

Prediction GmmDenoiser::predict(const Tensor& x_t, int t) const {
    if (t < 1 || t > sched_.steps())
        throw std::invalid_argument("denoiser: t=" + std::to_string(t) + " outside [1,T]");
    return predict_at(x_t, sched_.alpha_bar(t));
}

Prediction GmmDenoiser::predict_at(const Tensor& x_t, double ab) const {
    if (x_t.size() == gmm_.dim()) {
        Tensor x0 = gmm_posterior_x0(gmm_, x_t, ab);
        Tensor eps = eps_from_x0(x_t, x0, ab);
        return {std::move(eps), std::move(x0)};
    }
    if (!patch_ || x_t.shape().size() != 3)
        throw std::invalid_argument("denoiser: query shape " + shape_string(x_t.shape()) +
                                    " does not match mixture dimension " + std::to_string(gmm_.dim()));
    const std::size_t H = x_t.shape()[0], W = x_t.shape()[1], C = x_t.shape()[2];
    const std::size_t ph = (*patch_)[0], pw = (*patch_)[1], pc = (*patch_)[2];
    if (C != pc || H % ph != 0 || W % pw != 0)
        throw std::invalid_argument("denoiser: image " + shape_string(x_t.shape()) +
                                    " is not tiled by patch " + shape_string(*patch_));
    Tensor x0(x_t.shape());
    Tensor patch(Shape{ph, pw, pc});
    for (std::size_t r0 = 0; r0 < H; r0 += ph) {
        for (std::size_t c0 = 0; c0 < W; c0 += pw) {
            for (std::size_t r = 0; r < ph; ++r)
                for (std::size_t c = 0; c < pw; ++c)
                    for (std::size_t k = 0; k < C; ++k)
                        patch[(r * pw + c) * C + k] = x_t[((r0 + r) * W + c0 + c) * C + k];
            const Tensor p0 = gmm_posterior_x0(gmm_, patch, ab);
            for (std::size_t r = 0; r < ph; ++r)
                for (std::size_t c = 0; c < pw; ++c)
                    for (std::size_t k = 0; k < C; ++k)
                        x0[((r0 + r) * W + c0 + c) * C + k] = p0[(r * pw + c) * C + k];
        }
    }
    Tensor eps = eps_from_x0(x_t, x0, ab);
    return {std::move(eps), std::move(x0)};
}

}  // namespace syncsampler

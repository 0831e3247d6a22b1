#pragma once

#include <string>

#include "syncsampler/rng.hpp"
#include "syncsampler/schedule.hpp"
#include "syncsampler/tensor.hpp"

namespace syncsampler {

enum class SigmaPolicy { Zero, DDPM, Max };

std::string to_string(SigmaPolicy policy);
SigmaPolicy sigma_policy_from_string(const std::string& name);

// Posterior standard deviation for a step from ᾱ_t to ᾱ_prev (ᾱ_prev > ᾱ_t).
double sigma(SigmaPolicy policy, double alpha_bar_t, double alpha_bar_prev);
double sigma(SigmaPolicy policy, const Schedule& sched, int t, int t_prev);

// √ᾱ·x0 + √(1−ᾱ)·eps
Tensor forward_sample(const Tensor& x0, const Tensor& eps, double alpha_bar);
Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const Schedule& sched);

// (x_t − √(1−ᾱ)·eps)/√ᾱ
Tensor tweedie_x0(const Tensor& x_t, const Tensor& eps, double alpha_bar);
Tensor tweedie_x0(const Tensor& x_t, int t, const Tensor& eps, const Schedule& sched);

// (x_t − √ᾱ·x0)/√(1−ᾱ), the inverse of tweedie_x0 in eps.
Tensor eps_from_x0(const Tensor& x_t, const Tensor& x0, double alpha_bar);
Tensor eps_from_x0(const Tensor& x_t, int t, const Tensor& x0, const Schedule& sched);

// √ᾱ_prev·x0 + √(1−ᾱ_prev−σ²)·eps
Tensor ddim_mean(const Tensor& x0, const Tensor& eps, double alpha_bar_prev, double sigma);

// Same mean written through x_t instead of eps:
// √ᾱ_prev·x0 + √(1−ᾱ_prev−σ²)·(x_t − √ᾱ_t·x0)/√(1−ᾱ_t)
Tensor ddim_posterior_mean(const Tensor& x0, const Tensor& x_t, double alpha_bar_t,
                           double alpha_bar_prev, double sigma);

// √ᾱ_prev·x0, the eps-free mean at maximal stochasticity.
Tensor max_sigma_mean(const Tensor& x0, double alpha_bar_prev);

// One reverse step t -> t_prev: ddim_mean plus σ·g, with g drawn from noise.
// Under SigmaPolicy::Zero no draws are made.
Tensor ddim_step(const Tensor& x0t, const Tensor& eps, SigmaPolicy policy, const Schedule& sched,
                 int t, int t_prev, const NoiseStream& noise);

}  // namespace syncsampler

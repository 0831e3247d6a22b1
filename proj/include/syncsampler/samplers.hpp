#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncsampler/denoiser.hpp"
#include "syncsampler/diffusion.hpp"
#include "syncsampler/projection.hpp"

namespace syncsampler {

enum class Algorithm { Reverse, DS, SDS, StochSync, SDI };
enum class InnerSolver { DDIM, SecondOrder };
enum class SdsWeighting { OneMinusAlphaBar, Constant };

std::string to_string(Algorithm a);
std::string to_string(InnerSolver s);
std::string to_string(SdsWeighting w);
Algorithm algorithm_from_string(const std::string& name);
InnerSolver inner_solver_from_string(const std::string& name);
SdsWeighting sds_weighting_from_string(const std::string& name);

struct Toggles {
    bool max_sigma = true;
    bool multistep_x0 = true;
    bool nonoverlap_views = true;
    friend bool operator==(const Toggles&, const Toggles&) = default;
};

struct SamplerConfig {
    Algorithm algorithm = Algorithm::StochSync;
    SigmaPolicy sigma_policy = SigmaPolicy::Max;
    int t_start = 900;
    int t_stop = 270;
    int n_outer_steps = 25;
    InnerSolver inner_solver = InnerSolver::DDIM;
    int inner_steps = 50;
    bool decay_inner_steps = true;
    int inner_steps_floor = 4;
    Toggles toggles;
    // w(t) = sds_step_size·(1−ᾱ_t) or sds_step_size
    SdsWeighting sds_weighting = SdsWeighting::OneMinusAlphaBar;
    double sds_step_size = 1.0;
    int sds_iterations = 1000;
    int blend_last_k = 2;
    double blend_band = 0.1;
    int inversion_refinements = 10;
    std::uint64_t seed = 0;

    // Throws ConfigError.
    void validate(const Schedule& sched) const;
    // The σ policy StochSync actually uses for line 11.
    SigmaPolicy effective_sigma() const;
    // Inner 𝒢 steps for a solve starting at t.
    int inner_steps_at(int t) const;

    nlohmann::json to_json() const;
    // Keys absent from j keep their value in base.
    static SamplerConfig from_json(const nlohmann::json& j, SamplerConfig base);
    static SamplerConfig from_json(const nlohmann::json& j) { return from_json(j, SamplerConfig()); }
    friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

// Which views each step uses. Fixed views serve DS, SDS and the
// overlapping StochSync rows; the alternating pair serves non-overlap runs
// (initialized with set 0, then 1, 0, ... per outer step).
struct ViewPlan {
    std::vector<View> fixed;
    std::array<std::vector<View>, 2> alternating;

    static ViewPlan single(const View& v);
    static ViewPlan fixed_set(std::vector<View> views);
    // fixed = union of both sets
    static ViewPlan alternating_sets(std::vector<View> set0, std::vector<View> set1);
};

struct SyncProblem {
    const Denoiser& denoiser;
    const Projector& projector;
    ViewPlan views;
};

// Snapshot after a synchronization. x_t and x0 are the per-view samples at
// timestep t and their clean estimates that were aggregated into z.
struct StepRecord {
    int step = 0;  // 0 is the initialization
    int t = 0;
    std::span<const View> views;
    std::span<const Tensor> x_t;
    std::span<const Tensor> x0;
    const Tensor& z;
};

struct TraceRow {
    int step;
    int t;
    std::string metric;
    double value;
};

struct RunHooks {
    std::function<void(const StepRecord&)> observer;
    // Per-step residuals ‖f_c(z) − x0‖² per view (and SDS losses) when set.
    std::vector<TraceRow>* trace = nullptr;
};

// Algorithm 1. Returns the terminal sample.
Tensor reverse_process(const Denoiser& denoiser, const SamplerConfig& cfg, const Shape& shape,
                       const RunHooks& hooks = {});

// One σ=0 interval s -> t_next of the inner solver.
Tensor ode_interval(const Denoiser& denoiser, const Tensor& x, int s, int t_next, InnerSolver solver);

// 𝒢: deterministic solve from t to 0 on inner_steps intervals.
Tensor multistep_x0(const Denoiser& denoiser, const Tensor& x_t, int t, InnerSolver solver,
                    int inner_steps);

// Ascending σ=0 recursion from x0 to t_target on the same grid 𝒢 would use.
// refinements > 0 applies fixed-point iterations per interval so that each
// step inverts the corresponding DDIM step exactly.
Tensor ddim_invert(const Denoiser& denoiser, const Tensor& x0, int t_target, int steps,
                   int refinements = 10);

// Algorithm 2.
Tensor ds_synctweedies(const SyncProblem& problem, const SamplerConfig& cfg, const RunHooks& hooks = {});

// Algorithm 3, starting from z_init.
Tensor sds(const SyncProblem& problem, const SamplerConfig& cfg, Tensor z_init, const RunHooks& hooks = {});

// SDS with σ=0 where ε_t comes from DDIM inversion of f_c(z).
Tensor sdi(const SyncProblem& problem, const SamplerConfig& cfg, Tensor z_init, const RunHooks& hooks = {});

// Algorithm 4 with optional components.
Tensor stochsync(const SyncProblem& problem, const SamplerConfig& cfg, const RunHooks& hooks = {});

// Corrupts each projected view of z to t_restart and resumes the StochSync
// loop from there. t_restart = 0 returns z.
Tensor sdedit_refine(const SyncProblem& problem, const Tensor& z, int t_restart, const SamplerConfig& cfg,
                     const RunHooks& hooks = {});

// The two sides of the SDS loss identity for one draw:
// ‖f_c(z) − x0|t−1‖² and ((1−ᾱ_{t−1})/ᾱ_{t−1})·‖ε − ε_θ(x_{t−1})‖².
struct SdsLossPair {
    double instance_loss;
    double noise_loss;
};
SdsLossPair sds_loss_pair(const Denoiser& denoiser, const Tensor& projected, int t, const Tensor& eps);

// Dispatch on cfg.algorithm. SDS and SDI start from zeros.
Tensor run_sampler(const SyncProblem& problem, const SamplerConfig& cfg, const RunHooks& hooks = {});

// Normalized distance of pixel p of an instance image to its nearest border,
// in units of the image extent.
double border_distance(const Shape& instance, std::size_t pixel);

}  // namespace syncsampler

#include "syncsampler/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "syncsampler/parallel.hpp"

namespace syncsampler {

// ---- names ------------------------------------------------------------------

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Reverse: return "reverse";
        case Algorithm::DS: return "ds";
        case Algorithm::SDS: return "sds";
        case Algorithm::StochSync: return "stochsync";
        case Algorithm::SDI: return "sdi";
    }
    return "?";
}

std::string to_string(InnerSolver s) { return s == InnerSolver::DDIM ? "ddim" : "second_order"; }

std::string to_string(SdsWeighting w) {
    return w == SdsWeighting::OneMinusAlphaBar ? "one_minus_alpha_bar" : "constant";
}

Algorithm algorithm_from_string(const std::string& name) {
    for (auto a : {Algorithm::Reverse, Algorithm::DS, Algorithm::SDS, Algorithm::StochSync, Algorithm::SDI})
        if (to_string(a) == name) return a;
    throw ConfigError("unknown algorithm: " + name);
}

InnerSolver inner_solver_from_string(const std::string& name) {
    if (name == "ddim") return InnerSolver::DDIM;
    if (name == "second_order") return InnerSolver::SecondOrder;
    throw ConfigError("unknown inner solver: " + name);
}

SdsWeighting sds_weighting_from_string(const std::string& name) {
    if (name == "one_minus_alpha_bar") return SdsWeighting::OneMinusAlphaBar;
    if (name == "constant") return SdsWeighting::Constant;
    throw ConfigError("unknown SDS weighting: " + name);
}

// ---- config -----------------------------------------------------------------

void SamplerConfig::validate(const Schedule& sched) const {
    if (!(t_start <= sched.steps())) throw ConfigError("t_start exceeds the schedule length T");
    if (!(t_start > t_stop)) throw ConfigError("need t_start > t_stop");
    if (t_stop < 0) throw ConfigError("t_stop must be >= 0");
    if (n_outer_steps < 1) throw ConfigError("n_outer_steps must be >= 1");
    if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
    if (inner_steps_floor < 1) throw ConfigError("inner_steps_floor must be >= 1");
    if (blend_last_k < 0) throw ConfigError("blend_last_k must be >= 0");
    if (!(blend_band >= 0.0 && blend_band <= 1.0)) throw ConfigError("blend_band must be in [0,1]");
    if (sds_iterations < 0) throw ConfigError("sds_iterations must be >= 0");
    if (inversion_refinements < 0) throw ConfigError("inversion_refinements must be >= 0");
    if (algorithm == Algorithm::StochSync && toggles.nonoverlap_views && !toggles.max_sigma)
        throw ConfigError("non-overlapping views require maximum stochasticity");
}

SigmaPolicy SamplerConfig::effective_sigma() const {
    return toggles.max_sigma ? SigmaPolicy::Max : sigma_policy;
}

int SamplerConfig::inner_steps_at(int t) const {
    if (!decay_inner_steps) return inner_steps;
    const int floor = std::min(inner_steps_floor, inner_steps);
    const int decayed = static_cast<int>(std::lround(static_cast<double>(inner_steps) * t / t_start));
    return std::clamp(decayed, floor, inner_steps);
}

nlohmann::json SamplerConfig::to_json() const {
    return {
        {"algorithm", to_string(algorithm)},
        {"sigma_policy", to_string(sigma_policy)},
        {"t_start", t_start},
        {"t_stop", t_stop},
        {"n_outer_steps", n_outer_steps},
        {"inner_solver", to_string(inner_solver)},
        {"inner_steps", inner_steps},
        {"decay_inner_steps", decay_inner_steps},
        {"inner_steps_floor", inner_steps_floor},
        {"toggles",
         {{"max_sigma", toggles.max_sigma},
          {"multistep_x0", toggles.multistep_x0},
          {"nonoverlap_views", toggles.nonoverlap_views}}},
        {"sds_weighting", to_string(sds_weighting)},
        {"sds_step_size", sds_step_size},
        {"sds_iterations", sds_iterations},
        {"blend_last_k", blend_last_k},
        {"blend_band", blend_band},
        {"inversion_refinements", inversion_refinements},
        {"seed", seed},
    };
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j, SamplerConfig c) {
    static const std::vector<std::string> known = {
        "algorithm",      "sigma_policy",  "t_start",          "t_stop",         "n_outer_steps",
        "inner_solver",   "inner_steps",   "decay_inner_steps", "inner_steps_floor", "toggles",
        "sds_weighting",  "sds_step_size", "sds_iterations",    "blend_last_k",   "blend_band",
        "inversion_refinements", "seed"};
    if (!j.is_object()) throw ConfigError("sampler config must be an object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown sampler key: " + key);
    try {
        if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j["algorithm"].get<std::string>());
        if (j.contains("sigma_policy")) {
            try {
                c.sigma_policy = sigma_policy_from_string(j["sigma_policy"].get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        c.t_start = j.value("t_start", c.t_start);
        c.t_stop = j.value("t_stop", c.t_stop);
        c.n_outer_steps = j.value("n_outer_steps", c.n_outer_steps);
        if (j.contains("inner_solver")) c.inner_solver = inner_solver_from_string(j["inner_solver"].get<std::string>());
        c.inner_steps = j.value("inner_steps", c.inner_steps);
        c.decay_inner_steps = j.value("decay_inner_steps", c.decay_inner_steps);
        c.inner_steps_floor = j.value("inner_steps_floor", c.inner_steps_floor);
        if (j.contains("toggles")) {
            const auto& t = j["toggles"];
            c.toggles.max_sigma = t.value("max_sigma", c.toggles.max_sigma);
            c.toggles.multistep_x0 = t.value("multistep_x0", c.toggles.multistep_x0);
            c.toggles.nonoverlap_views = t.value("nonoverlap_views", c.toggles.nonoverlap_views);
        }
        if (j.contains("sds_weighting"))
            c.sds_weighting = sds_weighting_from_string(j["sds_weighting"].get<std::string>());
        c.sds_step_size = j.value("sds_step_size", c.sds_step_size);
        c.sds_iterations = j.value("sds_iterations", c.sds_iterations);
        c.blend_last_k = j.value("blend_last_k", c.blend_last_k);
        c.blend_band = j.value("blend_band", c.blend_band);
        c.inversion_refinements = j.value("inversion_refinements", c.inversion_refinements);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sampler config: ") + e.what());
    }
    return c;
}

ViewPlan ViewPlan::single(const View& v) { return fixed_set({v}); }

ViewPlan ViewPlan::fixed_set(std::vector<View> views) {
    ViewPlan p;
    p.fixed = std::move(views);
    p.alternating = {p.fixed, p.fixed};
    return p;
}

ViewPlan ViewPlan::alternating_sets(std::vector<View> set0, std::vector<View> set1) {
    ViewPlan p;
    p.fixed = set0;
    p.fixed.insert(p.fixed.end(), set1.begin(), set1.end());
    p.alternating = {std::move(set0), std::move(set1)};
    return p;
}

// ---- helpers ----------------------------------------------------------------

namespace {

NoiseStream noise(const SamplerConfig& cfg, NoisePurpose purpose, int t, int view, std::uint32_t sub = 0) {
    return NoiseStream({cfg.seed, purpose, static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(view), sub});
}

void report(const RunHooks& hooks, const Projector& proj, int step, int t, std::span<const View> views,
            std::span<const Tensor> x, std::span<const Tensor> x0, const Tensor& z) {
    if (hooks.trace) {
        for (std::size_t i = 0; i < views.size(); ++i)
            hooks.trace->push_back({step, t, "residual_view_" + std::to_string(views[i].id),
                                    squared_distance(proj.project(z, views[i]), x0[i])});
    }
    if (hooks.observer) hooks.observer(StepRecord{step, t, views, x, x0, z});
}

double log_snr(const Schedule& sched, int t) {
    const double ab = sched.alpha_bar(t);
    return 0.5 * std::log(ab / (1.0 - ab));
}

}  // namespace

double border_distance(const Shape& instance, std::size_t pixel) {
    if (instance.size() == 1) {
        const auto w = static_cast<double>(instance[0]);
        const auto i = static_cast<double>(pixel);
        return std::min(i, w - 1.0 - i) / w;
    }
    if (instance.size() < 2) throw std::invalid_argument("border_distance: unsupported shape");
    const std::size_t H = instance[0], W = instance[1];
    const std::size_t C = instance.size() > 2 ? instance[2] : 1;
    const std::size_t p = pixel / C;
    const auto r = static_cast<double>(p / W), c = static_cast<double>(p % W);
    const double d = std::min({r, static_cast<double>(H) - 1.0 - r, c, static_cast<double>(W) - 1.0 - c});
    return d / static_cast<double>(std::min(H, W));
}

// ---- Algorithm 1 ------------------------------------------------------------

Tensor reverse_process(const Denoiser& denoiser, const SamplerConfig& cfg, const Shape& shape,
                       const RunHooks& hooks) {
    const Schedule& sched = denoiser.schedule();
    cfg.validate(sched);
    const auto grid = timestep_grid(cfg.t_start, 0, cfg.n_outer_steps);
    const IdentityProjector proj(shape);
    const View views[1] = {identity_view()};

    Tensor x = noise(cfg, NoisePurpose::Initial, grid[0], 0).normal_tensor(shape);
    Prediction pred = denoiser.predict(x, grid[0]);
    report(hooks, proj, 0, grid[0], views, {&x, 1}, {&pred.x0, 1}, pred.x0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const int t = grid[k - 1], tp = grid[k];
        x = ddim_step(pred.x0, pred.eps, cfg.sigma_policy, sched, t, tp, noise(cfg, NoisePurpose::Step, t, 0));
        if (tp > 0)
            pred = denoiser.predict(x, tp);
        else
            pred.x0 = x;
        report(hooks, proj, static_cast<int>(k), tp, views, {&x, 1}, {&pred.x0, 1}, pred.x0);
    }
    return x;
}

// ---- 𝒢 and inversion --------------------------------------------------------

Tensor ode_interval(const Denoiser& denoiser, const Tensor& x, int s, int t_next, InnerSolver solver) {
    const Schedule& sched = denoiser.schedule();
    const Prediction p = denoiser.predict(x, s);
    const bool first_order = solver == InnerSolver::DDIM || s - t_next < 2;
    if (first_order) return ddim_mean(p.x0, p.eps, sched.alpha_bar(t_next), 0.0);

    if (t_next == 0) {
        // The log-SNR is infinite at t = 0, so the last interval takes a
        // midpoint step in y = x/√ᾱ against σ̄ = √((1−ᾱ)/ᾱ), where dy/dσ̄ = ε.
        auto sbar = [&](int u) { return std::sqrt((1.0 - sched.alpha_bar(u)) / sched.alpha_bar(u)); };
        const double ss = sbar(s);
        int s1 = 1;
        for (int u = 1; u < s; ++u)
            if (std::abs(sbar(u) - 0.5 * ss) < std::abs(sbar(s1) - 0.5 * ss)) s1 = u;
        const double r1 = (ss - sbar(s1)) / ss;
        const double root_s = std::sqrt(sched.alpha_bar(s));
        Tensor u(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i)
            u[i] = std::sqrt(sched.alpha_bar(s1)) * (x[i] / root_s + (sbar(s1) - ss) * p.eps[i]);
        const Tensor e1 = denoiser.eps(u, s1);
        Tensor out(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] = x[i] / root_s - ss * (p.eps[i] + (e1[i] - p.eps[i]) / (2.0 * r1));
        return out;
    }

    // Two-stage exponential integrator (DPM-Solver-2) with the intermediate
    // point at the integer timestep closest to the log-SNR midpoint.
    const double ls = log_snr(sched, s), lt = log_snr(sched, t_next);
    const double mid = 0.5 * (ls + lt);
    int s1 = t_next + 1;
    for (int u = t_next + 1; u < s; ++u)
        if (std::abs(log_snr(sched, u) - mid) < std::abs(log_snr(sched, s1) - mid)) s1 = u;
    const double h = lt - ls;
    const double r1 = (log_snr(sched, s1) - ls) / h;
    const double a_s = std::sqrt(sched.alpha_bar(s)), a_1 = std::sqrt(sched.alpha_bar(s1)),
                 a_t = std::sqrt(sched.alpha_bar(t_next));
    const double g_1 = std::sqrt(1.0 - sched.alpha_bar(s1)), g_t = std::sqrt(1.0 - sched.alpha_bar(t_next));
    const Tensor u = lincomb(a_1 / a_s, x, -g_1 * std::expm1(r1 * h), p.eps);
    const Tensor e1 = denoiser.eps(u, s1);
    const double c = g_t * std::expm1(h);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = (a_t / a_s) * x[i] - c * p.eps[i] - c / (2.0 * r1) * (e1[i] - p.eps[i]);
    return out;
}

Tensor multistep_x0(const Denoiser& denoiser, const Tensor& x_t, int t, InnerSolver solver, int inner_steps) {
    if (t < 1) throw std::invalid_argument("multistep_x0: t must be >= 1");
    const auto grid = timestep_grid(t, 0, inner_steps);
    // A single interval is the Tweedie estimate under either solver.
    if (grid.size() == 2) solver = InnerSolver::DDIM;
    Tensor x = x_t;
    for (std::size_t k = 1; k < grid.size(); ++k) x = ode_interval(denoiser, x, grid[k - 1], grid[k], solver);
    return x;
}

Tensor ddim_invert(const Denoiser& denoiser, const Tensor& x0, int t_target, int steps, int refinements) {
    if (t_target == 0 || steps == 0) return x0;
    if (t_target < 0 || steps < 0) throw std::invalid_argument("ddim_invert: negative target or steps");
    const Schedule& sched = denoiser.schedule();
    auto grid = timestep_grid(t_target, 0, steps);
    std::reverse(grid.begin(), grid.end());
    Tensor x = x0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const int s = grid[k - 1], n = grid[k];
        const double ab_s = sched.alpha_bar(s), ab_n = sched.alpha_bar(n);
        Tensor next;
        if (s == 0) {
            next = forward_sample(x, denoiser.eps(x, n), ab_n);
        } else {
            const Prediction p = denoiser.predict(x, s);
            next = ddim_mean(p.x0, p.eps, ab_n, 0.0);
        }
        // Solve D(next) = x, where D is the σ=0 step n -> s.
        const double a = std::sqrt(ab_n / ab_s), b = std::sqrt(1.0 - ab_s), c = std::sqrt(1.0 - ab_n);
        for (int r = 0; r < refinements; ++r) {
            const Tensor e = denoiser.eps(next, n);
            double change = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double v = a * (x[i] - b * e[i]) + c * e[i];
                change = std::max(change, std::abs(v - next[i]));
                scale = std::max(scale, std::abs(v));
                next[i] = v;
            }
            if (change <= 1e-15 * (1.0 + scale)) break;
        }
        x = std::move(next);
    }
    return x;
}

// ---- Algorithm 2 ------------------------------------------------------------

Tensor ds_synctweedies(const SyncProblem& problem, const SamplerConfig& cfg, const RunHooks& hooks) {
    const Denoiser& den = problem.denoiser;
    const Projector& proj = problem.projector;
    const Schedule& sched = den.schedule();
    cfg.validate(sched);
    const auto& views = problem.views.fixed;
    if (views.empty()) throw std::invalid_argument("ds_synctweedies: empty view set");
    const auto grid = timestep_grid(cfg.t_start, 0, cfg.n_outer_steps);
    const std::size_t N = views.size();

    std::vector<Tensor> x(N), x0(N), eps(N);
    parallel_for(N, [&](std::size_t i) {
        x[i] = noise(cfg, NoisePurpose::Initial, grid[0], views[i].id).normal_tensor(proj.instance_shape(views[i]));
        Prediction p = den.predict(x[i], grid[0]);
        x0[i] = std::move(p.x0);
        eps[i] = std::move(p.eps);
    });
    Tensor z = proj.synchronize(views, x0, nullptr);
    report(hooks, proj, 0, grid[0], views, x, x0, z);

    for (std::size_t k = 1; k < grid.size(); ++k) {
        const int t = grid[k - 1], tp = grid[k];
        parallel_for(N, [&](std::size_t i) {
            const Tensor x0p = proj.project(z, views[i]);
            x[i] = ddim_step(x0p, eps[i], cfg.sigma_policy, sched, t, tp,
                             noise(cfg, NoisePurpose::Step, t, views[i].id));
            if (tp > 0) {
                Prediction p = den.predict(x[i], tp);
                x0[i] = std::move(p.x0);
                eps[i] = std::move(p.eps);
            } else {
                x0[i] = x[i];
            }
        });
        z = proj.synchronize(views, x0, &z);
        report(hooks, proj, static_cast<int>(k), tp, views, x, x0, z);
    }
    return z;
}

// ---- Algorithm 3 and SDI ----------------------------------------------------

SdsLossPair sds_loss_pair(const Denoiser& denoiser, const Tensor& projected, int t, const Tensor& eps) {
    if (t < 2) throw std::invalid_argument("sds_loss_pair: need t >= 2");
    const Schedule& sched = denoiser.schedule();
    const double ab = sched.alpha_bar(t - 1);
    const Tensor x = forward_sample(projected, eps, ab);
    const Prediction p = denoiser.predict(x, t - 1);
    return {squared_distance(projected, p.x0), (1.0 - ab) / ab * squared_distance(eps, p.eps)};
}

namespace {

double sds_weight(const SamplerConfig& cfg, const Schedule& sched, int t) {
    return cfg.sds_weighting == SdsWeighting::Constant ? cfg.sds_step_size
                                                       : cfg.sds_step_size * (1.0 - sched.alpha_bar(t));
}

void gradient_step(const Projector& proj, Tensor& z, const View& v, const Tensor& residual, double w) {
    SplatAccumulator acc(proj.canonical_shape());
    proj.splat(residual, v, acc);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= w * acc.value_sum[i];
}

}  // namespace

Tensor sds(const SyncProblem& problem, const SamplerConfig& cfg, Tensor z, const RunHooks& hooks) {
    const Denoiser& den = problem.denoiser;
    const Projector& proj = problem.projector;
    const Schedule& sched = den.schedule();
    cfg.validate(sched);
    const auto& views = problem.views.fixed;
    if (views.empty()) throw std::invalid_argument("sds: empty view set");
    require_same_shape(z, Tensor(proj.canonical_shape()), "sds initial canonical");
    const int n_views = static_cast<int>(views.size());

    for (int k = 0; k < cfg.sds_iterations; ++k) {
        const NoiseStream draws = noise(cfg, NoisePurpose::SdsSchedule, 0, 0, static_cast<std::uint32_t>(k));
        const int t = static_cast<int>(draws.uniform_int(0, 2, cfg.t_start));
        const View& v = views[static_cast<std::size_t>(draws.uniform_int(1, 0, n_views - 1))];
        const Tensor x0p = proj.project(z, v);
        const Tensor e = noise(cfg, NoisePurpose::SdsNoise, t, v.id, static_cast<std::uint32_t>(k))
                             .normal_tensor(x0p.shape());
        // x_{t−1} ~ N(√ᾱ_{t−1} x0, (1−ᾱ_{t−1}) I), the max-σ step
        const double ab_prev = sched.alpha_bar(t - 1);
        const Tensor x = forward_sample(x0p, e, ab_prev);
        const Prediction p = den.predict(x, t - 1);
        const Tensor residual = x0p - p.x0;
        if (hooks.trace) {
            hooks.trace->push_back({k, t, "sds_instance_loss", squared_norm(residual)});
            hooks.trace->push_back({k, t, "sds_noise_loss", (1.0 - ab_prev) / ab_prev * squared_distance(e, p.eps)});
        }
        gradient_step(proj, z, v, residual, sds_weight(cfg, sched, t));
        if (hooks.observer) {
            const View vs[1] = {v};
            hooks.observer(StepRecord{k + 1, t, vs, {&x, 1}, {&p.x0, 1}, z});
        }
    }
    return z;
}

Tensor sdi(const SyncProblem& problem, const SamplerConfig& cfg, Tensor z, const RunHooks& hooks) {
    const Denoiser& den = problem.denoiser;
    const Projector& proj = problem.projector;
    const Schedule& sched = den.schedule();
    cfg.validate(sched);
    const auto& views = problem.views.fixed;
    if (views.empty()) throw std::invalid_argument("sdi: empty view set");
    require_same_shape(z, Tensor(proj.canonical_shape()), "sdi initial canonical");
    const int n_views = static_cast<int>(views.size());
    const int t_low = std::max(cfg.t_stop, 1) + 1;
    const int iters = cfg.sds_iterations;

    for (int k = 0; k < iters; ++k) {
        const double frac = iters > 1 ? static_cast<double>(k) / (iters - 1) : 0.0;
        const int t = static_cast<int>(std::lround(cfg.t_start + (t_low - cfg.t_start) * frac));
        const NoiseStream draws = noise(cfg, NoisePurpose::SdsSchedule, 0, 0, static_cast<std::uint32_t>(k));
        const View& v = views[static_cast<std::size_t>(draws.uniform_int(1, 0, n_views - 1))];
        const Tensor x0p = proj.project(z, v);
        const Tensor x_t = ddim_invert(den, x0p, t, cfg.inner_steps_at(t), cfg.inversion_refinements);
        const Tensor e = den.eps(x_t, t);
        const Tensor x = ddim_mean(x0p, e, sched.alpha_bar(t - 1), 0.0);
        const Prediction p = den.predict(x, t - 1);
        const Tensor residual = x0p - p.x0;
        if (hooks.trace) hooks.trace->push_back({k, t, "sds_instance_loss", squared_norm(residual)});
        gradient_step(proj, z, v, residual, sds_weight(cfg, sched, t));
        if (hooks.observer) {
            const View vs[1] = {v};
            hooks.observer(StepRecord{k + 1, t, vs, {&x, 1}, {&p.x0, 1}, z});
        }
    }
    return z;
}

// ---- Algorithm 4 ------------------------------------------------------------

namespace {

// 𝒢 with RePaint-style compositing: before each interval, pixels within the
// current border band are replaced by a forward-noised copy of background.
// The band starts as the whole view and shrinks linearly to cfg.blend_band.
Tensor blended_multistep_x0(const Denoiser& den, const Tensor& x_t, int t, int steps, const Tensor& background,
                            const SamplerConfig& cfg, int outer_t, int view_id) {
    const Schedule& sched = den.schedule();
    const auto grid = timestep_grid(t, 0, steps);
    const std::size_t n = grid.size() - 1;
    std::vector<double> dist(x_t.size());
    for (std::size_t p = 0; p < dist.size(); ++p) dist[p] = border_distance(x_t.shape(), p);
    Tensor x = x_t;
    for (std::size_t k = 0; k < n; ++k) {
        const double width = n == 1 ? cfg.blend_band
                                    : 1.0 + (cfg.blend_band - 1.0) * static_cast<double>(k) / (n - 1);
        const double ab = sched.alpha_bar(grid[k]);
        const Tensor xi = noise(cfg, NoisePurpose::Blend, outer_t, view_id, static_cast<std::uint32_t>(k))
                              .normal_tensor(x.shape());
        const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
        for (std::size_t p = 0; p < x.size(); ++p)
            if (dist[p] <= width) x[p] = a * background[p] + b * xi[p];
        x = ode_interval(den, x, grid[k], grid[k + 1], cfg.inner_solver);
    }
    return x;
}

struct SyncState {
    std::vector<View> views;
    std::vector<Tensor> x, x0, eps;
    Tensor z;
};

const std::vector<View>& views_for_step(const SyncProblem& problem, const SamplerConfig& cfg, std::size_t k) {
    if (cfg.toggles.nonoverlap_views) return problem.views.alternating[k % 2];
    return problem.views.fixed;
}

// Clean estimate at t for one view, plus the ε it implies.
void estimate(const Denoiser& den, const SamplerConfig& cfg, const Tensor& x, int t, int steps, Tensor& x0,
              Tensor& eps) {
    if (cfg.toggles.multistep_x0) {
        x0 = multistep_x0(den, x, t, cfg.inner_solver, steps);
        if (!cfg.toggles.max_sigma) eps = eps_from_x0(x, x0, den.schedule().alpha_bar(t));
    } else {
        Prediction p = den.predict(x, t);
        x0 = std::move(p.x0);
        eps = std::move(p.eps);
    }
}

Tensor stochsync_loop(const SyncProblem& problem, const SamplerConfig& cfg, const RunHooks& hooks,
                      SyncState st, const std::vector<int>& grid) {
    const Denoiser& den = problem.denoiser;
    const Projector& proj = problem.projector;
    const Schedule& sched = den.schedule();
    const SigmaPolicy policy = cfg.effective_sigma();
    const std::size_t K = grid.size() - 1;

    for (std::size_t k = 1; k <= K; ++k) {
        const int t = grid[k - 1], tp = grid[k];
        const auto& views = views_for_step(problem, cfg, k);
        const std::size_t N = views.size();
        const bool carry_eps = !cfg.toggles.max_sigma;
        if (carry_eps && views != st.views) throw ConfigError("noise cannot be carried across changing views");
        st.x.resize(N);
        st.x0.resize(N);
        st.eps.resize(N);
        const bool blend = cfg.toggles.multistep_x0 && tp > 0 && static_cast<int>(K - k) < cfg.blend_last_k;
        parallel_for(N, [&](std::size_t i) {
            const Tensor x0p = proj.project(st.z, views[i]);
            const Tensor& e = carry_eps ? st.eps[i] : Tensor(x0p.shape());
            st.x[i] = ddim_step(x0p, e, policy, sched, t, tp, noise(cfg, NoisePurpose::Step, t, views[i].id));
            if (tp == 0) {
                st.x0[i] = st.x[i];
            } else if (blend) {
                st.x0[i] = blended_multistep_x0(den, st.x[i], tp, cfg.inner_steps_at(tp), x0p, cfg, tp, views[i].id);
                if (carry_eps) st.eps[i] = eps_from_x0(st.x[i], st.x0[i], sched.alpha_bar(tp));
            } else {
                estimate(den, cfg, st.x[i], tp, cfg.inner_steps_at(tp), st.x0[i], st.eps[i]);
            }
        });
        st.views = views;
        st.z = proj.synchronize(views, st.x0, &st.z);
        report(hooks, proj, static_cast<int>(k), tp, st.views, st.x, st.x0, st.z);
    }
    return std::move(st.z);
}

}  // namespace

Tensor stochsync(const SyncProblem& problem, const SamplerConfig& cfg, const RunHooks& hooks) {
    const Denoiser& den = problem.denoiser;
    const Projector& proj = problem.projector;
    cfg.validate(den.schedule());
    const auto grid = timestep_grid(cfg.t_start, cfg.t_stop, cfg.n_outer_steps);

    SyncState st;
    st.views = views_for_step(problem, cfg, 0);
    const std::size_t N = st.views.size();
    if (N == 0) throw std::invalid_argument("stochsync: empty view set");
    st.x.resize(N);
    st.x0.resize(N);
    st.eps.resize(N);
    parallel_for(N, [&](std::size_t i) {
        st.x[i] = noise(cfg, NoisePurpose::Initial, grid[0], st.views[i].id)
                      .normal_tensor(proj.instance_shape(st.views[i]));
        estimate(den, cfg, st.x[i], grid[0], cfg.inner_steps, st.x0[i], st.eps[i]);
    });
    st.z = proj.synchronize(st.views, st.x0, nullptr);
    report(hooks, proj, 0, grid[0], st.views, st.x, st.x0, st.z);
    return stochsync_loop(problem, cfg, hooks, std::move(st), grid);
}

Tensor sdedit_refine(const SyncProblem& problem, const Tensor& z, int t_restart, const SamplerConfig& cfg,
                     const RunHooks& hooks) {
    if (t_restart == 0) return z;
    const Denoiser& den = problem.denoiser;
    const Projector& proj = problem.projector;
    cfg.validate(den.schedule());
    if (t_restart < 0 || t_restart > cfg.t_start)
        throw std::invalid_argument("sdedit_refine: t_restart must be in [0, t_start]");
    require_same_shape(z, Tensor(proj.canonical_shape()), "sdedit_refine canonical");

    SyncState st;
    st.z = z;
    st.views = views_for_step(problem, cfg, 0);
    const std::size_t N = st.views.size();
    st.x.resize(N);
    st.x0.resize(N);
    st.eps.resize(N);
    const double ab = den.schedule().alpha_bar(t_restart);
    parallel_for(N, [&](std::size_t i) {
        const Tensor x0p = proj.project(z, st.views[i]);
        st.x[i] = forward_sample(x0p, noise(cfg, NoisePurpose::Corrupt, t_restart, st.views[i].id).normal_tensor(x0p.shape()),
                                 ab);
        estimate(den, cfg, st.x[i], t_restart, cfg.inner_steps_at(t_restart), st.x0[i], st.eps[i]);
    });
    st.z = proj.synchronize(st.views, st.x0, &st.z);
    report(hooks, proj, 0, t_restart, st.views, st.x, st.x0, st.z);
    if (t_restart <= cfg.t_stop) return std::move(st.z);

    const double share = static_cast<double>(t_restart - cfg.t_stop) / (cfg.t_start - cfg.t_stop);
    const int steps = std::max(1, static_cast<int>(std::lround(cfg.n_outer_steps * share)));
    return stochsync_loop(problem, cfg, hooks, std::move(st), timestep_grid(t_restart, cfg.t_stop, steps));
}

Tensor run_sampler(const SyncProblem& problem, const SamplerConfig& cfg, const RunHooks& hooks) {
    switch (cfg.algorithm) {
        case Algorithm::Reverse: {
            if (problem.views.fixed.size() != 1)
                throw ConfigError("reverse process needs exactly one view and an identity projector");
            return reverse_process(problem.denoiser, cfg, problem.projector.canonical_shape(), hooks);
        }
        case Algorithm::DS: return ds_synctweedies(problem, cfg, hooks);
        case Algorithm::SDS: return sds(problem, cfg, Tensor(problem.projector.canonical_shape()), hooks);
        case Algorithm::SDI: return sdi(problem, cfg, Tensor(problem.projector.canonical_shape()), hooks);
        case Algorithm::StochSync: return stochsync(problem, cfg, hooks);
    }
    throw ConfigError("unknown algorithm");
}

}  // namespace syncsampler

#include "syncsampler/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "syncsampler/parallel.hpp"

namespace syncsampler {

// ---- metrics ----------------------------------------------------------------

double measurement_error(const Tensor& x0t, const Tensor& mask, const Tensor& y) {
    require_same_shape(x0t, mask, "measurement_error mask");
    require_same_shape(x0t, y, "measurement_error measurement");
    double s = 0.0;
    for (std::size_t i = 0; i < x0t.size(); ++i) {
        const double r = mask[i] * (x0t[i] - y[i]);
        s += r * r;
    }
    return s;
}

SeamPartition seam_partition(const Projector& proj, std::span<const View> views) {
    const std::size_t sites = proj.site_count(), C = proj.channels();
    std::vector<std::vector<bool>> signature(sites, std::vector<bool>(views.size(), false));
    for (std::size_t k = 0; k < views.size(); ++k) {
        SplatAccumulator acc(proj.canonical_shape());
        proj.splat(Tensor(proj.instance_shape(views[k]), 1.0), views[k], acc);
        for (std::size_t s = 0; s < sites; ++s) signature[s][k] = acc.weight_sum[s * C] > 0.0;
    }
    auto covered = [&](std::size_t s) {
        return std::find(signature[s].begin(), signature[s].end(), true) != signature[s].end();
    };

    SeamPartition part;
    std::vector<std::array<std::size_t, 2>> axes;
    for (std::size_t s = 0; s < sites; ++s) {
        if (!covered(s) || !proj.gradient_neighbors(s, axes)) continue;
        bool complete = true, differs = false;
        for (const auto& pair : axes)
            for (std::size_t nb : pair) {
                complete = complete && covered(nb);
                differs = differs || signature[nb] != signature[s];
            }
        if (!complete) continue;
        (differs ? part.boundary : part.interior).push_back(s);
    }
    return part;
}

double seam_score(const Projector& proj, const Tensor& z, const SeamPartition& part) {
    if (part.boundary.empty() || part.interior.empty())
        throw std::invalid_argument("seam_score: layout has an empty boundary or interior set");
    if (z.shape() != proj.canonical_shape()) throw std::invalid_argument("seam_score: canonical shape mismatch");
    const std::size_t C = proj.channels();
    std::vector<std::array<std::size_t, 2>> axes;
    auto mean_gradient = [&](const std::vector<std::size_t>& sites) {
        double total = 0.0;
        for (std::size_t s : sites) {
            proj.gradient_neighbors(s, axes);
            for (std::size_t c = 0; c < C; ++c) {
                double g2 = 0.0;
                for (const auto& [minus, plus] : axes) {
                    const double d = 0.5 * (z[plus * C + c] - z[minus * C + c]);
                    g2 += d * d;
                }
                total += std::sqrt(g2);
            }
        }
        return total / static_cast<double>(sites.size() * C);
    };
    const double b = mean_gradient(part.boundary), i = mean_gradient(part.interior);
    if (b == 0.0 && i == 0.0) return 1.0;
    return b / i;
}

double seam_score(const Projector& proj, const Tensor& z, std::span<const View> views) {
    return seam_score(proj, z, seam_partition(proj, views));
}

void MetricSeries::add(int step, int t, double value) {
    if (!points.empty() && step <= points.back().step)
        throw std::invalid_argument("MetricSeries: steps must increase");
    if (!std::isfinite(value)) throw std::invalid_argument("MetricSeries: non-finite value");
    points.push_back({step, t, value});
}

// ---- artifacts --------------------------------------------------------------

std::string csv_text(std::span<const CsvRow> rows) {
    std::string out = "experiment,variant,seed,step,t,metric,value\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.value);
        out += r.experiment + ',' + r.variant + ',' + std::to_string(r.seed) + ',' + std::to_string(r.step) + ',' +
               std::to_string(r.t) + ',' + r.metric + ',' + buf + '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoError("write failed: " + path);
}

std::string ppm_bytes(const Tensor& image, ImageRange* range) {
    const Shape& s = image.shape();
    std::size_t H = 1, W = image.size(), C = 1;
    if (s.size() >= 2) {
        H = s[0];
        W = s[1];
        C = s.size() > 2 ? s[2] : 1;
    }
    if (C != 1 && C != 3) throw std::invalid_argument("ppm: need 1 or 3 channels");
    if (image.empty()) throw std::invalid_argument("ppm: empty image");
    const auto [lo, hi] = std::minmax_element(image.values().begin(), image.values().end());
    const ImageRange r{*lo, *hi};
    if (range) *range = r;
    const double span = r.max - r.min;

    std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    out.reserve(out.size() + H * W * 3);
    for (std::size_t p = 0; p < H * W; ++p)
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = image[p * C + (C == 3 ? c : 0)];
            const double u = span > 0.0 ? (v - r.min) / span : 0.0;
            out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u)));
        }
    return out;
}

ImageRange write_ppm(const std::string& path, const Tensor& image) {
    ImageRange r{};
    write_text_file(path, ppm_bytes(image, &r));
    write_text_file(path + ".json", nlohmann::json{{"min", r.min}, {"max", r.max}}.dump(2) + "\n");
    return r;
}

void write_report(ExperimentReport& report, const std::string& dir, const EmitFlags& emit) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    if (emit.csv) {
        const std::string name = report.experiment + ".csv";
        write_text_file(dir + "/" + name, csv_text(report.rows));
        report.artifacts.push_back(name);
    }
    if (emit.images)
        for (const auto& img : report.images) {
            const std::string name = img.name + ".ppm";
            write_ppm(dir + "/" + name, img.image);
            report.artifacts.push_back(name);
            report.artifacts.push_back(name + ".json");
        }
    nlohmann::json summary = {{"experiment", report.experiment}, {"config", report.config}, {"summary", report.summary}};
    write_text_file(dir + "/summary.json", summary.dump(2) + "\n");
    report.artifacts.push_back("summary.json");
}

// ---- inpainting -------------------------------------------------------------

namespace {

Schedule linear_schedule(int T) { return make_schedule(ScheduleKind::LinearBeta, T); }

std::vector<std::size_t> unobserved_coords(const Tensor& mask) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] == 0.0) out.push_back(i);
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

InpaintingSetup default_inpainting_setup() {
    InpaintingSetup s{
        GaussianMixture({{0.5, {1.0, 1.0}, 0.01, "a"}, {0.5, {-1.0, -1.0}, 0.01, "b"}}),
        Tensor({2}, std::vector<double>{1.0, 0.0}),
    };
    return s;
}

std::vector<std::pair<std::string, SamplerConfig>> inpainting_variants(const InpaintingSetup& setup) {
    SamplerConfig base;
    base.t_start = setup.t_start;
    base.t_stop = 0;
    base.n_outer_steps = setup.outer_steps;
    base.blend_last_k = 0;

    SamplerConfig zero = base;
    zero.algorithm = Algorithm::DS;
    zero.sigma_policy = SigmaPolicy::Zero;

    SamplerConfig max = zero;
    max.sigma_policy = SigmaPolicy::Max;

    SamplerConfig ours = base;
    ours.algorithm = Algorithm::StochSync;
    ours.toggles = {true, true, false};
    ours.inner_steps = setup.stochsync_inner_steps;
    return {{"sigma_zero", zero}, {"max_sigma", max}, {"stochsync", ours}};
}

Tensor inpainting_measurement(const InpaintingSetup& setup, const Denoiser& den, std::uint64_t seed) {
    const Shape shape{setup.gmm.dim()};
    const Tensor xT = NoiseStream({seed, NoisePurpose::Initial, static_cast<std::uint32_t>(setup.t_start), 0, 0})
                          .normal_tensor(shape);
    const Tensor g = multistep_x0(den, xT, setup.t_start, InnerSolver::DDIM, setup.preview_steps);
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t k = 0; k < setup.gmm.components().size(); ++k) {
        const Tensor m(shape, setup.gmm.components()[k].mean);
        const double d = squared_distance(g, m);
        if (d > far_d) {
            far_d = d;
            far = k;
        }
    }
    Tensor y(shape, setup.gmm.components()[far].mean);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= setup.mask[i];
    return y;
}

ExperimentReport run_inpainting_experiment(const InpaintingSetup& setup) {
    if (setup.mask.size() != setup.gmm.dim()) throw ConfigError("inpainting mask must match the mixture dimension");
    if (setup.n_seeds < 1) throw ConfigError("inpainting needs at least one seed");
    const GmmDenoiser den(setup.gmm, linear_schedule(setup.schedule_steps));
    const auto variants = inpainting_variants(setup);
    const auto hidden = unobserved_coords(setup.mask);
    const std::optional<GaussianMixture> hidden_gmm =
        hidden.empty() ? std::nullopt : std::optional(setup.gmm.marginal(hidden));
    const Shape shape{setup.gmm.dim()};

    struct SeedResult {
        std::vector<std::vector<CsvRow>> rows;
        std::vector<int> steps_to_threshold;
        std::vector<double> final_nll;
        std::vector<Tensor> final_z;
    };
    std::vector<SeedResult> results(static_cast<std::size_t>(setup.n_seeds));

    parallel_for(results.size(), [&](std::size_t s) {
        const std::uint64_t seed = setup.seed + s;
        const Tensor y = inpainting_measurement(setup, den, seed);
        const MaskedProjector proj(setup.mask, y);
        SeedResult& out = results[s];
        for (const auto& [name, base] : variants) {
            SamplerConfig cfg = base;
            cfg.seed = seed;
            std::vector<CsvRow> rows;
            int hit = setup.outer_steps + 1;
            RunHooks hooks;
            hooks.observer = [&](const StepRecord& rec) {
                const Tensor& x = rec.x_t[0];
                const Tensor preview =
                    rec.t > 0 ? multistep_x0(den, x, rec.t, InnerSolver::DDIM, setup.preview_steps) : x;
                const double err = measurement_error(preview, setup.mask, y);
                if (err < setup.threshold && hit > setup.outer_steps) hit = rec.step;
                rows.push_back({"inpainting", name, seed, rec.step, rec.t, "measurement_error", err});
                rows.push_back(
                    {"inpainting", name, seed, rec.step, rec.t, "sync_error", measurement_error(rec.z, setup.mask, y)});
            };
            const SyncProblem problem{den, proj, ViewPlan::single(identity_view())};
            const Tensor z = run_sampler(problem, cfg, hooks);
            double nll = 0.0;
            if (hidden_gmm) {
                Tensor zh({hidden.size()});
                for (std::size_t i = 0; i < hidden.size(); ++i) zh[i] = z[hidden[i]];
                nll = gmm_score_nll(*hidden_gmm, {&zh, 1});
            }
            rows.push_back({"inpainting", name, seed, setup.outer_steps, 0, "steps_to_threshold",
                            static_cast<double>(hit)});
            rows.push_back({"inpainting", name, seed, setup.outer_steps, 0, "final_nll_unobserved", nll});
            out.rows.push_back(std::move(rows));
            out.steps_to_threshold.push_back(hit);
            out.final_nll.push_back(nll);
            out.final_z.push_back(z);
        }
    });

    ExperimentReport report;
    report.experiment = "inpainting";
    report.config = {{"gmm", setup.gmm.to_json()},
                     {"mask", setup.mask.storage()},
                     {"schedule_steps", setup.schedule_steps},
                     {"n_seeds", setup.n_seeds},
                     {"seed", setup.seed},
                     {"outer_steps", setup.outer_steps},
                     {"t_start", setup.t_start},
                     {"preview_steps", setup.preview_steps},
                     {"stochsync_inner_steps", setup.stochsync_inner_steps},
                     {"threshold", setup.threshold}};
    for (std::size_t v = 0; v < variants.size(); ++v)
        for (const auto& r : results)
            report.rows.insert(report.rows.end(), r.rows[v].begin(), r.rows[v].end());

    for (std::size_t v = 0; v < variants.size(); ++v) {
        std::vector<double> steps, nll;
        int wins = 0;
        for (const auto& r : results) {
            steps.push_back(r.steps_to_threshold[v]);
            nll.push_back(r.final_nll[v]);
            if (r.steps_to_threshold[v] < r.steps_to_threshold[0]) ++wins;
        }
        report.summary[variants[v].first] = {
            {"mean_steps_to_threshold", mean(steps)},
            {"mean_final_nll_unobserved", mean(nll)},
            {"fraction_faster_than_sigma_zero", static_cast<double>(wins) / setup.n_seeds},
        };
        report.images.push_back({"inpainting_" + variants[v].first, results[0].final_z[v]});
    }
    return report;
}

// ---- divergence -------------------------------------------------------------

DivergenceSetup default_divergence_setup() {
    const std::size_t d = 64;
    const double a = 1.5 * 2.0 / std::sqrt(static_cast<double>(d));
    return {GaussianMixture({{0.5, std::vector<double>(d, a), 0.5, "plus"},
                             {0.5, std::vector<double>(d, -a), 0.5, "minus"}})};
}

double divergence_mean_nll(const DivergenceSetup& setup, const GaussianMixture& gmm, const Schedule& sched,
                           SigmaPolicy policy, int steps) {
    const GmmDenoiser den(gmm, sched);
    const IdentityProjector proj({gmm.dim()});
    std::vector<Tensor> finals(static_cast<std::size_t>(setup.n_seeds));
    parallel_for(finals.size(), [&](std::size_t s) {
        SamplerConfig cfg;
        cfg.algorithm = Algorithm::DS;
        cfg.sigma_policy = policy;
        cfg.t_start = sched.steps();
        cfg.t_stop = 0;
        cfg.n_outer_steps = steps;
        cfg.seed = setup.seed + s;
        finals[s] = ds_synctweedies({den, proj, ViewPlan::single(identity_view())}, cfg);
    });
    return gmm_score_nll(gmm, finals);
}

ExperimentReport run_divergence_sweep(const DivergenceSetup& setup) {
    if (setup.step_counts.empty()) throw ConfigError("divergence sweep needs step counts");
    if (setup.n_seeds < 1) throw ConfigError("divergence sweep needs at least one seed");
    for (int c : setup.step_counts)
        if (c < 1 || c > setup.schedule_steps) throw ConfigError("step counts must lie in [1, T]");
    const Schedule sched = make_rescaled_linear_schedule(setup.schedule_steps);

    ExperimentReport report;
    report.experiment = "divergence";
    report.config = {{"gmm", setup.gmm.to_json()},
                     {"schedule_steps", setup.schedule_steps},
                     {"step_counts", setup.step_counts},
                     {"n_seeds", setup.n_seeds},
                     {"seed", setup.seed}};
    for (SigmaPolicy policy : {SigmaPolicy::Max, SigmaPolicy::Zero}) {
        nlohmann::json per_count = nlohmann::json::object();
        for (int c : setup.step_counts) {
            const double nll = divergence_mean_nll(setup, setup.gmm, sched, policy, c);
            report.rows.push_back({"divergence", to_string(policy), setup.seed, c, 0, "mean_nll", nll});
            per_count[std::to_string(c)] = nll;
        }
        report.summary[to_string(policy)] = per_count;
    }
    return report;
}

// ---- panorama ---------------------------------------------------------------

PanoramaTask make_panorama_task(const PanoramaSetup& setup) {
    if (setup.width != 2 * setup.height) throw ConfigError("panorama width must be twice its height");
    if (setup.n_components < 1 || !(setup.variance > 0.0)) throw ConfigError("invalid panorama mixture");
    if (setup.n_eval_views < 1) throw ConfigError("need at least one evaluation view");
    EquirectLayout layout;
    layout.fov = setup.fov;
    layout.n_views = static_cast<int>(std::lround(360.0 / setup.fov));
    layout.width = layout.height = setup.view_size;

    View centre;
    centre.fov = setup.fov;
    centre.width = centre.height = setup.view_size;
    const std::size_t d = static_cast<std::size_t>(setup.view_size) * setup.view_size;
    std::vector<MixtureComponent> comps;
    for (int j = 0; j < setup.n_components; ++j) {
        const double phase = 2.0 * std::numbers::pi * j / setup.n_components;
        std::vector<double> mean(d);
        for (int r = 0; r < setup.view_size; ++r)
            for (int c = 0; c < setup.view_size; ++c) {
                const auto [lon, lat] = equirect_pixel_direction(centre, r, c);
                (void)lat;
                mean[static_cast<std::size_t>(r * setup.view_size + c)] = std::cos(setup.harmonic * lon + phase);
            }
        comps.push_back({1.0 / setup.n_components, std::move(mean), setup.variance, "phase" + std::to_string(j)});
    }

    std::vector<View> eval;
    for (int k = 0; k < setup.n_eval_views; ++k) {
        View v = centre;
        v.azimuth = 360.0 * k / setup.n_eval_views;
        v.id = 1000 + k;
        eval.push_back(v);
    }
    return {GaussianMixture(std::move(comps)), EquirectProjector(setup.height, setup.width, 1),
            ViewPlan::alternating_sets(sample_nonoverlapping_views(0, layout), sample_nonoverlapping_views(1, layout)),
            std::move(eval), std::nullopt};
}

std::vector<Tensor> image_patches(const Tensor& image, const Shape& patch) {
    const Shape& s = image.shape();
    if (s.size() != 3 || patch.size() != 3 || patch[2] != s[2] || s[0] % patch[0] || s[1] % patch[1])
        throw std::invalid_argument("image_patches: image " + shape_string(s) + " is not tiled by " +
                                    shape_string(patch));
    const std::size_t W = s[1], C = s[2], ph = patch[0], pw = patch[1];
    std::vector<Tensor> out;
    for (std::size_t r0 = 0; r0 < s[0]; r0 += ph)
        for (std::size_t c0 = 0; c0 < W; c0 += pw) {
            Tensor p(patch);
            for (std::size_t r = 0; r < ph; ++r)
                for (std::size_t c = 0; c < pw; ++c)
                    for (std::size_t k = 0; k < C; ++k) p[(r * pw + c) * C + k] = image[((r0 + r) * W + c0 + c) * C + k];
            out.push_back(std::move(p));
        }
    return out;
}

SamplerConfig panorama_sampler_defaults() {
    SamplerConfig c;
    c.algorithm = Algorithm::StochSync;
    c.t_start = 900;
    c.t_stop = 270;
    c.n_outer_steps = 25;
    c.inner_steps = 50;
    c.blend_last_k = 2;
    return c;
}

std::vector<AblationRow> ablation_rows(std::vector<std::string>* skipped) {
    // Ordered as the ablation table: DS, +max σ, +𝒢, +both, +max σ +N.O., full.
    const std::array<std::array<bool, 3>, 6> table = {{
        {false, false, false},
        {true, false, false},
        {false, true, false},
        {true, true, false},
        {true, false, true},
        {true, true, true},
    }};
    std::vector<AblationRow> rows;
    for (int bits = 0; bits < 8; ++bits) {
        const Toggles t{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0};
        if (t.nonoverlap_views && !t.max_sigma) {
            if (skipped)
                skipped->push_back("max_sigma=0 multistep_x0=" + std::to_string(t.multistep_x0) +
                                   " nonoverlap_views=1: non-overlapping views require maximum stochasticity");
            continue;
        }
        for (std::size_t i = 0; i < table.size(); ++i)
            if (table[i][0] == t.max_sigma && table[i][1] == t.multistep_x0 && table[i][2] == t.nonoverlap_views)
                rows.push_back({static_cast<int>(i) + 1, t});
    }
    std::sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) { return a.id < b.id; });
    return rows;
}

SamplerConfig ablation_config(const SamplerConfig& base, const Toggles& toggles) {
    SamplerConfig c = base;
    c.algorithm = Algorithm::StochSync;
    c.toggles = toggles;
    if (!toggles.max_sigma) c.sigma_policy = SigmaPolicy::Zero;
    if (!toggles.multistep_x0) c.t_stop = 0;
    return c;
}

PanoramaOutcome run_panorama(const PanoramaTask& task, const SamplerConfig& cfg, const RunHooks& hooks) {
    const GmmDenoiser den(task.gmm, linear_schedule(1000), std::nullopt, task.patch);
    const SyncProblem problem{den, task.projector, task.plan};
    Tensor z = run_sampler(problem, cfg, hooks);
    std::vector<Tensor> views;
    for (const auto& v : task.eval_views) {
        Tensor img = task.projector.project(z, v);
        if (!task.patch) {
            views.push_back(std::move(img));
            continue;
        }
        for (auto& p : image_patches(img, *task.patch)) views.push_back(std::move(p));
    }
    const double seam = seam_score(task.projector, z, task.plan.fixed);
    const double nll = gmm_score_nll(task.gmm, views);
    return {std::move(z), seam, nll};
}

ExperimentReport run_ablation_grid(const PanoramaSetup& setup, const SamplerConfig& base, int n_seeds,
                                   std::uint64_t seed) {
    if (n_seeds < 1) throw ConfigError("ablation needs at least one seed");
    const PanoramaTask task = make_panorama_task(setup);
    std::vector<std::string> skipped;
    const auto rows = ablation_rows(&skipped);

    std::vector<std::vector<PanoramaOutcome>> out(rows.size(), std::vector<PanoramaOutcome>(n_seeds));
    parallel_for(rows.size() * static_cast<std::size_t>(n_seeds), [&](std::size_t job) {
        const std::size_t r = job / n_seeds, s = job % n_seeds;
        SamplerConfig cfg = ablation_config(base, rows[r].toggles);
        cfg.seed = seed + s;
        out[r][s] = run_panorama(task, cfg);
    });

    ExperimentReport report;
    report.experiment = "ablation";
    report.config = {{"canvas", {setup.height, setup.width}},
                     {"view_size", setup.view_size},
                     {"fov", setup.fov},
                     {"n_components", setup.n_components},
                     {"variance", setup.variance},
                     {"harmonic", setup.harmonic},
                     {"n_eval_views", setup.n_eval_views},
                     {"sampler", base.to_json()},
                     {"n_seeds", n_seeds},
                     {"seed", seed}};
    report.summary["skipped"] = skipped;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::string name = "row" + std::to_string(rows[r].id);
        const SamplerConfig cfg = ablation_config(base, rows[r].toggles);
        std::vector<double> seams, nlls;
        for (int s = 0; s < n_seeds; ++s) {
            const auto& o = out[r][static_cast<std::size_t>(s)];
            report.rows.push_back({"ablation", name, seed + s, cfg.n_outer_steps, cfg.t_stop, "seam_score", o.seam});
            report.rows.push_back({"ablation", name, seed + s, cfg.n_outer_steps, cfg.t_stop, "nll", o.nll});
            seams.push_back(o.seam);
            nlls.push_back(o.nll);
        }
        report.summary[name] = {{"max_sigma", rows[r].toggles.max_sigma},
                                {"multistep_x0", rows[r].toggles.multistep_x0},
                                {"nonoverlap_views", rows[r].toggles.nonoverlap_views},
                                {"median_seam_score", median(seams)},
                                {"mean_nll", mean(nlls)}};
        report.images.push_back({"ablation_" + name, out[r][0].z});
    }
    return report;
}

// ---- ring -------------------------------------------------------------------

RingSetup default_ring_setup() {
    const int window = 8;
    std::vector<double> ramp(static_cast<std::size_t>(window));
    for (int i = 0; i < window; ++i) ramp[static_cast<std::size_t>(i)] = static_cast<double>(i) / window;
    return {48, window, GaussianMixture({{1.0, std::move(ramp), 0.0, "ramp"}})};
}

ExperimentReport run_ring_task(const RingSetup& setup, const SamplerConfig& cfg, std::vector<TraceRow>* trace) {
    if (setup.gmm.dim() != static_cast<std::size_t>(setup.window))
        throw ConfigError("ring mixture dimension must equal the window width");
    const RingProjector proj(setup.n, setup.window);
    const GmmDenoiser den(setup.gmm, linear_schedule(1000));
    const ViewPlan plan = ViewPlan::alternating_sets(ring_nonoverlapping_views(0, setup.n, setup.window),
                                                     ring_nonoverlapping_views(1, setup.n, setup.window));
    RunHooks hooks;
    hooks.trace = trace;
    std::vector<View> last_views;
    // A step that lands on t = 0 only re-projects z, so the views that shaped
    // z are those of the last step with t > 0.
    hooks.observer = [&](const StepRecord& rec) {
        if (rec.t > 0 || last_views.empty()) last_views.assign(rec.views.begin(), rec.views.end());
    };
    const Tensor z = run_sampler({den, proj, plan}, cfg, hooks);

    ExperimentReport report;
    report.experiment = "ring";
    report.config = {{"n", setup.n}, {"window", setup.window}, {"gmm", setup.gmm.to_json()}, {"sampler", cfg.to_json()}};
    report.summary["canonical"] = z.storage();
    if (setup.gmm.components().size() == 1 && setup.gmm.components()[0].variance == 0.0) {
        // Distance to the mean tiled through the last view set.
        SplatAccumulator acc(proj.canonical_shape());
        const Tensor m({static_cast<std::size_t>(setup.window)}, setup.gmm.components()[0].mean);
        for (const auto& v : last_views) proj.splat(m, v, acc);
        report.summary["max_abs_deviation_from_tiled_mean"] = max_abs_difference(z, acc.resolve(&z));
    }
    report.images.push_back({"ring_canonical", z});
    return report;
}

}  // namespace syncsampler

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "syncsampler/experiments.hpp"

using namespace syncsampler;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Seam ratio on a ring written out by hand: boundary sites are those next to
// a window edge, gradients are wrap-around central differences.
double ring_seam_oracle(const Tensor& z, int w) {
    const auto n = static_cast<int>(z.size());
    double b = 0, i = 0;
    int nb = 0, ni = 0;
    for (int s = 0; s < n; ++s) {
        const double g = std::abs(z[static_cast<std::size_t>((s + 1) % n)] - z[static_cast<std::size_t>((s + n - 1) % n)]) / 2;
        if (s % w == 0 || s % w == w - 1)
            b += g, ++nb;
        else
            i += g, ++ni;
    }
    return (b / nb) / (i / ni);
}

}  // namespace

TEST_CASE("measurement error") {
    const Tensor mask({2}, std::vector<double>{1, 0});
    CHECK(measurement_error(Tensor({2}, std::vector<double>{3, 9}), mask, Tensor({2}, std::vector<double>{1, 0})) == 4.0);
    CHECK(measurement_error(Tensor({2}, std::vector<double>{1, 5}), mask, Tensor({2}, std::vector<double>{1, 0})) == 0.0);
    CHECK(measurement_error(Tensor({2}, std::vector<double>{7, 5}), Tensor({2}), Tensor({2}, 3.0)) == 0.0);
    CHECK_THROWS_AS(measurement_error(Tensor({3}), mask, Tensor({2})), std::invalid_argument);
}

TEST_CASE("metric series") {
    MetricSeries m{"x", {}};
    m.add(0, 900, 1.0);
    m.add(1, 800, 0.5);
    CHECK_THROWS_AS(m.add(1, 700, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(m.add(2, 700, NAN), std::invalid_argument);
    CHECK(m.points.size() == 2);
}

TEST_CASE("seam score on the ring") {
    const RingProjector proj(48, 8);
    const auto views = ring_nonoverlapping_views(0, 48, 8);
    const SeamPartition part = seam_partition(proj, views);
    CHECK(part.boundary.size() == 12);
    CHECK(part.interior.size() == 36);

    CHECK(seam_score(proj, Tensor({48}, 2.5), views) == 1.0);

    // sawtooth with its single jump on the edge between windows 0 and 1
    Tensor on_edge({48}), off_edge({48});
    for (std::size_t j = 0; j < 48; ++j) {
        on_edge[j] = static_cast<double>((j + 40) % 48) / 48.0;
        off_edge[j] = static_cast<double>((j + 36) % 48) / 48.0;  // jump at 12, mid-window
    }
    const double s_on = seam_score(proj, on_edge, views), s_off = seam_score(proj, off_edge, views);
    CHECK(std::abs(s_on - ring_seam_oracle(on_edge, 8)) < 1e-12);
    CHECK(std::abs(s_off - ring_seam_oracle(off_edge, 8)) < 1e-12);
    // the two sites beside the jump each see (jump − slope)/2 = 46/96; the
    // other ten boundary sites and all interior sites see the slope 1/48
    const double bound = (2 * (46.0 / 96) + 10 * (1.0 / 48)) / 12 / (1.0 / 48);
    CHECK(s_on >= bound - 1e-9);
    CHECK(s_on > 4.0);
    CHECK(s_off < s_on);

    // a continuous target solved exactly from disjoint windows
    Tensor target({48});
    for (std::size_t j = 0; j < 48; ++j) target[j] = std::sin(2 * std::numbers::pi * (j + 0.5) / 48);
    std::vector<Tensor> imgs;
    for (const auto& v : views) imgs.push_back(proj.project(target, v));
    const Tensor solved = aggregate_least_squares(proj, views, imgs);
    // The exact solve adds no seam of its own: its score is the target's.
    CHECK(solved == target);
    CHECK(seam_score(proj, solved, views) == seam_score(proj, target, views));
    // A target with one gradient magnitude everywhere scores 1.
    Tensor zigzag({48});
    for (std::size_t j = 0; j < 48; ++j) zigzag[j] = (j % 2) ? 1.0 : 0.0;
    std::vector<Tensor> zimgs;
    for (const auto& v : views) zimgs.push_back(proj.project(zigzag, v));
    CHECK(seam_score(proj, aggregate_least_squares(proj, views, zimgs), views) <= 1.0 + 1e-6);

    CHECK_THROWS_AS(seam_score(proj, target, std::vector<View>{views[0]}), std::invalid_argument);
}

TEST_CASE("seam score on the toy panorama") {
    const PanoramaTask task = make_panorama_task({});
    const Tensor flat(task.projector.canonical_shape(), -0.3);
    CHECK(seam_score(task.projector, flat, task.plan.fixed) == 1.0);
    const SeamPartition part = seam_partition(task.projector, task.plan.alternating[0]);
    CHECK(!part.boundary.empty());
    CHECK(!part.interior.empty());
}

TEST_CASE("CSV and image artifacts") {
    const std::vector<CsvRow> rows = {{"e", "v", 3, 1, 900, "m", 0.1}, {"e", "v", 3, 2, 800, "m", -2.0}};
    CHECK(csv_text(rows) ==
          "experiment,variant,seed,step,t,metric,value\n"
          "e,v,3,1,900,m,0.10000000000000001\n"
          "e,v,3,2,800,m,-2\n");

    ImageRange r{};
    const std::string ppm = ppm_bytes(Tensor({1, 2, 1}, std::vector<double>{-1.0, 3.0}), &r);
    CHECK(ppm == std::string("P6\n2 1\n255\n") + std::string(3, '\0') + std::string(3, '\xff'));
    CHECK(r.min == -1.0);
    CHECK(r.max == 3.0);
    CHECK(ppm_bytes(Tensor({1, 1, 1}, 4.0)).back() == '\0');

    const auto dir = std::filesystem::temp_directory_path() / "syncsampler_test_artifacts";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    ExperimentReport rep;
    rep.experiment = "demo";
    rep.rows = rows;
    rep.summary = {{"x", 1}};
    rep.images.push_back({"img", Tensor({2, 2, 1}, std::vector<double>{0, 1, 2, 3})});
    write_report(rep, dir.string(), {});
    for (const auto& a : rep.artifacts) CHECK(std::filesystem::exists(dir / a));
    CHECK(slurp(dir / "demo.csv") == csv_text(rows));
    const auto side = nlohmann::json::parse(slurp(dir / "img.ppm.json"));
    CHECK(side["min"] == 0.0);
    CHECK(side["max"] == 3.0);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(write_text_file((dir / "missing" / "x.txt").string(), "x"), IoError);
}

TEST_CASE("inpainting with a fully observed image") {
    InpaintingSetup s = default_inpainting_setup();
    s.mask = Tensor({2}, 1.0);
    s.n_seeds = 3;
    s.outer_steps = 8;
    s.stochsync_inner_steps = 4;
    const ExperimentReport rep = run_inpainting_experiment(s);
    int checked = 0;
    for (const auto& r : rep.rows)
        if (r.metric == "sync_error") {
            CHECK(r.value == 0.0);
            ++checked;
        }
    CHECK(checked == 3 * 3 * 9);
}

TEST_CASE("inpainting keeps the observed entries after every synchronization") {
    InpaintingSetup s = default_inpainting_setup();
    s.n_seeds = 4;
    s.outer_steps = 10;
    s.stochsync_inner_steps = 4;
    const ExperimentReport rep = run_inpainting_experiment(s);
    for (const auto& r : rep.rows)
        if (r.metric == "sync_error") CHECK(r.value == 0.0);
    for (const char* v : {"sigma_zero", "max_sigma", "stochsync"}) REQUIRE(rep.summary.contains(v));
}

TEST_CASE("inpainting with nothing observed is the plain reverse process") {
    const InpaintingSetup s = default_inpainting_setup();
    const GmmDenoiser den(s.gmm, make_schedule(ScheduleKind::LinearBeta, s.schedule_steps));
    const MaskedProjector proj(Tensor({2}), Tensor({2}, 0.7));
    for (const auto& [name, base] : inpainting_variants(s)) {
        if (name != "sigma_zero") continue;
        SamplerConfig c = base;
        c.seed = 17;
        std::vector<Tensor> a, b;
        RunHooks ha, hb;
        ha.observer = [&](const StepRecord& r) { a.push_back(r.z); };
        hb.observer = [&](const StepRecord& r) { b.push_back(r.z); };
        run_sampler({den, proj, ViewPlan::single(identity_view())}, c, ha);
        SamplerConfig rc = c;
        rc.algorithm = Algorithm::Reverse;
        reverse_process(den, rc, {2}, hb);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
}

TEST_CASE("inpainting variants") {
    const auto vs = inpainting_variants(default_inpainting_setup());
    REQUIRE(vs.size() == 3);
    CHECK(vs[0].first == "sigma_zero");
    CHECK(vs[0].second.sigma_policy == SigmaPolicy::Zero);
    CHECK(vs[1].second.sigma_policy == SigmaPolicy::Max);
    CHECK(vs[2].second.algorithm == Algorithm::StochSync);
    CHECK(vs[2].second.toggles.max_sigma);
    CHECK(vs[2].second.toggles.multistep_x0);
}

TEST_CASE("divergence sweep with a single step") {
    DivergenceSetup s = default_divergence_setup();
    s.step_counts = {1};
    s.n_seeds = 20;
    const ExperimentReport rep = run_divergence_sweep(s);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].variant == "max");
    CHECK(rep.rows[1].variant == "zero");
    CHECK(rep.rows[0].value == rep.rows[1].value);
    s.step_counts = {0};
    CHECK_THROWS_AS(run_divergence_sweep(s), ConfigError);
}

TEST_CASE("ablation rows") {
    std::vector<std::string> skipped;
    const auto rows = ablation_rows(&skipped);
    REQUIRE(rows.size() == 6);
    // (max σ, multi-step, non-overlapping views)
    const Toggles expect[6] = {{false, false, false}, {true, false, false}, {false, true, false},
                               {true, true, false},   {true, false, true},  {true, true, true}};
    for (int i = 0; i < 6; ++i) {
        CHECK(rows[i].id == i + 1);
        CHECK(rows[i].toggles == expect[i]);
        CHECK((!rows[i].toggles.nonoverlap_views || rows[i].toggles.max_sigma));
    }
    CHECK(skipped.size() == 2);
    const SamplerConfig base = panorama_sampler_defaults();
    const SamplerConfig row1 = ablation_config(base, expect[0]);
    CHECK(row1.sigma_policy == SigmaPolicy::Zero);
    CHECK(row1.t_stop == 0);
    const SamplerConfig row6 = ablation_config(base, expect[5]);
    CHECK(row6.t_stop == base.t_stop);
    CHECK(row6.effective_sigma() == SigmaPolicy::Max);
}

TEST_CASE("ablation grid is byte-for-byte reproducible") {
    PanoramaSetup setup;
    setup.n_eval_views = 4;
    SamplerConfig base = panorama_sampler_defaults();
    base.n_outer_steps = 4;
    base.inner_steps = 4;
    const ExperimentReport a = run_ablation_grid(setup, base, 2, 5);
    const ExperimentReport b = run_ablation_grid(setup, base, 2, 5);
    CHECK(csv_text(a.rows) == csv_text(b.rows));
    REQUIRE(a.images.size() == b.images.size());
    CHECK(a.images.size() == 6);
    for (std::size_t i = 0; i < a.images.size(); ++i) CHECK(ppm_bytes(a.images[i].image) == ppm_bytes(b.images[i].image));
    for (const char* key : {"row1", "row6"}) {
        REQUIRE(a.summary.contains(key));
        CHECK(a.summary[key].contains("median_seam_score"));
        CHECK(a.summary[key].contains("mean_nll"));
    }
}

TEST_CASE("panorama task layout") {
    const PanoramaTask task = make_panorama_task({});
    CHECK(task.plan.alternating[0].size() == 5);
    CHECK(task.plan.alternating[1].size() == 5);
    CHECK(task.plan.alternating[1][0].azimuth == doctest::Approx(36.0));
    CHECK(task.eval_views.size() == 20);
    CHECK(task.gmm.dim() == 16u * 16u);
    const SamplerConfig d = panorama_sampler_defaults();
    CHECK(d.t_start == 900);
    CHECK(d.t_stop == 270);
    CHECK(d.n_outer_steps == 25);
    PanoramaSetup bad;
    bad.width = 50;
    CHECK_THROWS_AS(make_panorama_task(bad), ConfigError);
}

TEST_CASE("ring task reproduces the tiled pattern") {
    const RingSetup ring = default_ring_setup();
    SamplerConfig c;
    c.t_start = 900;
    c.t_stop = 0;
    c.n_outer_steps = 5;
    c.inner_steps = 3;
    const ExperimentReport rep = run_ring_task(ring, c, nullptr);
    CHECK(rep.summary["max_abs_deviation_from_tiled_mean"] == 0.0);
}

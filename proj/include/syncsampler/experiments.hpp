#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncsampler/denoiser.hpp"
#include "syncsampler/gmm.hpp"
#include "syncsampler/projection.hpp"
#include "syncsampler/samplers.hpp"

namespace syncsampler {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- metrics ----------------------------------------------------------------

// ‖M⊙(x0t − y)‖², so entries of y off the mask are ignored
double measurement_error(const Tensor& x0t, const Tensor& mask, const Tensor& y);

// Canonical sites next to a change in view coverage (boundary) and sites whose
// whole neighborhood shares one coverage signature (interior). Sites without
// a complete, covered neighborhood belong to neither.
struct SeamPartition {
    std::vector<std::size_t> boundary;
    std::vector<std::size_t> interior;
};
SeamPartition seam_partition(const Projector& proj, std::span<const View> views);

// Mean central-difference gradient magnitude over the boundary divided by the
// same mean over the interior. A zero/zero ratio is reported as 1.
double seam_score(const Projector& proj, const Tensor& z, const SeamPartition& part);
double seam_score(const Projector& proj, const Tensor& z, std::span<const View> views);

struct MetricPoint {
    int step;
    int t;
    double value;
};

struct MetricSeries {
    std::string name;
    std::vector<MetricPoint> points;

    // Rejects non-increasing steps and non-finite values.
    void add(int step, int t, double value);
};

// ---- artifacts --------------------------------------------------------------

struct CsvRow {
    std::string experiment;
    std::string variant;
    std::uint64_t seed;
    int step;
    int t;
    std::string metric;
    double value;
};

// Header plus one line per row; values printed with 17 significant digits.
std::string csv_text(std::span<const CsvRow> rows);
void write_text_file(const std::string& path, const std::string& content);

struct ImageRange {
    double min;
    double max;
};
// Binary P6 with a linear min..max -> 0..255 map; one-channel images are
// replicated to gray. Writes `path` and `path + ".json"` holding the range.
ImageRange write_ppm(const std::string& path, const Tensor& image);
// Raw P6 bytes for an image, as written by write_ppm.
std::string ppm_bytes(const Tensor& image, ImageRange* range = nullptr);

struct NamedImage {
    std::string name;
    Tensor image;  // H x W x C, or a vector shown as a single row
};

struct ExperimentReport {
    std::string experiment;
    nlohmann::json config;
    std::vector<CsvRow> rows;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<NamedImage> images;
    std::vector<std::string> artifacts;  // relative paths written by write_report
};

struct EmitFlags {
    bool images = true;
    bool csv = true;
    bool trace = false;
};

// Writes <dir>/<experiment>.csv, <dir>/summary.json and one PPM per image;
// records the relative paths in report.artifacts.
void write_report(ExperimentReport& report, const std::string& dir, const EmitFlags& emit);

// ---- inpainting (measurement-error convergence) -----------------------------

struct InpaintingSetup {
    GaussianMixture gmm;
    Tensor mask;  // 1 = observed
    int schedule_steps = 1000;
    int n_seeds = 100;
    std::uint64_t seed = 0;
    int outer_steps = 50;
    int t_start = 1000;
    int preview_steps = 32;
    int stochsync_inner_steps = 20;
    double threshold = 1e-2;
};

// Two components at ±(1, 1) with variance 0.01; coordinate 0 observed.
InpaintingSetup default_inpainting_setup();

// Per variant sampler configuration ("sigma_zero", "max_sigma", "stochsync").
std::vector<std::pair<std::string, SamplerConfig>> inpainting_variants(const InpaintingSetup& setup);

// The measurement for one seed: the observed entries of the component mean
// farthest from 𝒢(x_T).
Tensor inpainting_measurement(const InpaintingSetup& setup, const Denoiser& denoiser, std::uint64_t seed);

ExperimentReport run_inpainting_experiment(const InpaintingSetup& setup);

// ---- max-σ divergence -------------------------------------------------------

struct DivergenceSetup {
    GaussianMixture gmm;
    int schedule_steps = 10000;
    std::vector<int> step_counts = {10, 100, 1000, 10000};
    int n_seeds = 200;
    std::uint64_t seed = 0;
};

// d = 64, two components with means ±0.375 per coordinate, variance 0.5.
DivergenceSetup default_divergence_setup();

// Mean terminal NLL of DS on the identity projection for one policy and count.
double divergence_mean_nll(const DivergenceSetup& setup, const GaussianMixture& gmm, const Schedule& sched,
                           SigmaPolicy policy, int steps);

ExperimentReport run_divergence_sweep(const DivergenceSetup& setup);

// ---- panorama and ablation --------------------------------------------------

struct PanoramaSetup {
    std::size_t height = 40;
    std::size_t width = 80;
    int view_size = 16;
    double fov = 72.0;
    int n_components = 10;
    double variance = 0.01;
    int harmonic = 3;
    int n_eval_views = 20;
};

// Toy 360° panorama. The denoiser's mixture lives on whole views: component j
// is the az=0 projection of cos(harmonic·lon + 2πj/K).
struct PanoramaTask {
    GaussianMixture gmm;
    EquirectProjector projector;
    ViewPlan plan;  // alternating 5-view sets; fixed = their union
    std::vector<View> eval_views;
    std::optional<Shape> patch;  // set when the mixture models patches of a view
};
PanoramaTask make_panorama_task(const PanoramaSetup& setup);

// t 900 -> 270, 25 outer steps, 50 inner steps, 2 blended steps.
SamplerConfig panorama_sampler_defaults();

struct AblationRow {
    int id;
    Toggles toggles;
};
// All toggle combinations that are valid, numbered as in the ablation table;
// rejected combinations are described in `skipped`.
std::vector<AblationRow> ablation_rows(std::vector<std::string>* skipped = nullptr);
// Sampler configuration of one row: rows without max σ use σ = 0, rows
// without 𝒢 run to t = 0.
SamplerConfig ablation_config(const SamplerConfig& base, const Toggles& toggles);

struct PanoramaOutcome {
    Tensor z;
    double seam;
    double nll;
};
// Splits an H x W x C image into row-major patches of `patch` shape.
std::vector<Tensor> image_patches(const Tensor& image, const Shape& patch);

PanoramaOutcome run_panorama(const PanoramaTask& task, const SamplerConfig& cfg, const RunHooks& hooks = {});

ExperimentReport run_ablation_grid(const PanoramaSetup& setup, const SamplerConfig& base, int n_seeds,
                                   std::uint64_t seed);

// ---- ring smoke task --------------------------------------------------------

struct RingSetup {
    std::size_t n = 48;
    int window = 8;
    GaussianMixture gmm;  // over windows (d = window)
};
// Point mass at a ramp pattern over one window.
RingSetup default_ring_setup();

ExperimentReport run_ring_task(const RingSetup& setup, const SamplerConfig& cfg, std::vector<TraceRow>* trace);

}  // namespace syncsampler

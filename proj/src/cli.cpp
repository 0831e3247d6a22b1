#include "syncsampler/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>

namespace fs = std::filesystem;

namespace syncsampler {

std::string to_string(Task task) {
    switch (task) {
        case Task::Panorama: return "panorama";
        case Task::Inpaint: return "inpaint";
        case Task::Ring: return "ring";
        case Task::Divergence: return "divergence";
        case Task::Ablation: return "ablation";
    }
    return "?";
}

Task task_from_string(const std::string& name) {
    for (auto t : {Task::Panorama, Task::Inpaint, Task::Ring, Task::Divergence, Task::Ablation})
        if (to_string(t) == name) return t;
    throw ConfigError("unknown task: " + name);
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

// ---- RunConfig --------------------------------------------------------------

namespace {

const Schedule& default_schedule() {
    static const Schedule s = make_schedule(ScheduleKind::LinearBeta, 1000);
    return s;
}

int task_default_seeds(Task t) {
    switch (t) {
        case Task::Inpaint: return 100;
        case Task::Divergence: return 200;
        case Task::Ablation: return 20;
        default: return 1;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

nlohmann::json read_json_file(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (n_seeds < 0) throw ConfigError("n_seeds must be >= 0");
    if (panorama.width != 2 * panorama.height) throw ConfigError("panorama width must be twice its height");
    if (panorama.view_size < 1) throw ConfigError("view_size must be >= 1");
    if (!(panorama.fov > 0.0 && panorama.fov < 180.0)) throw ConfigError("fov must lie in (0, 180)");
    if (std::abs(360.0 / panorama.fov - std::round(360.0 / panorama.fov)) > 1e-9)
        throw ConfigError("fov must divide 360 so the view sets tile the horizon");
    if (task == Task::Divergence) {
        if (step_counts.empty()) throw ConfigError("step_counts must not be empty");
        for (int c : step_counts)
            if (c < 1 || c > 10000) throw ConfigError("step counts must lie in [1, 10000]");
    }
    SamplerConfig s = sampler;
    if (task == Task::Panorama || task == Task::Ring) s.validate(default_schedule());
    if (task == Task::Ablation) {
        s.toggles = {true, true, true};
        s.validate(default_schedule());
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json s = sampler.to_json();
    s.erase("seed");
    return {
        {"task", to_string(task)},
        {"preset", preset},
        {"seed", seed},
        {"sampler", s},
        {"panorama",
         {{"height", panorama.height},
          {"width", panorama.width},
          {"view_size", panorama.view_size},
          {"fov", panorama.fov},
          {"n_components", panorama.n_components},
          {"variance", panorama.variance},
          {"harmonic", panorama.harmonic},
          {"n_eval_views", panorama.n_eval_views}}},
        {"gmm", gmm},
        {"views", views},
        {"out_dir", out_dir},
        {"emit", {{"images", emit.images}, {"csv", emit.csv}, {"trace", emit.trace}}},
        {"n_seeds", n_seeds},
        {"step_counts", step_counts},
    };
}

RunConfig RunConfig::from_json(const nlohmann::json& j, RunConfig c) {
    static const std::vector<std::string> known = {"task",  "preset",   "seed", "sampler", "panorama",    "gmm",
                                                   "views", "out_dir", "emit", "n_seeds", "step_counts"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key: " + key);
    try {
        if (j.contains("task")) c.task = task_from_string(j["task"].get<std::string>());
        c.preset = j.value("preset", c.preset);
        c.seed = j.value("seed", c.seed);
        if (j.contains("sampler")) c.sampler = SamplerConfig::from_json(j["sampler"], c.sampler);
        if (j.contains("panorama")) {
            const auto& p = j["panorama"];
            c.panorama.height = p.value("height", c.panorama.height);
            c.panorama.width = p.value("width", c.panorama.width);
            c.panorama.view_size = p.value("view_size", c.panorama.view_size);
            c.panorama.fov = p.value("fov", c.panorama.fov);
            c.panorama.n_components = p.value("n_components", c.panorama.n_components);
            c.panorama.variance = p.value("variance", c.panorama.variance);
            c.panorama.harmonic = p.value("harmonic", c.panorama.harmonic);
            c.panorama.n_eval_views = p.value("n_eval_views", c.panorama.n_eval_views);
        }
        c.gmm = j.value("gmm", c.gmm);
        c.views = j.value("views", c.views);
        c.out_dir = j.value("out_dir", c.out_dir);
        if (j.contains("emit")) {
            const auto& e = j["emit"];
            c.emit.images = e.value("images", c.emit.images);
            c.emit.csv = e.value("csv", c.emit.csv);
            c.emit.trace = e.value("trace", c.emit.trace);
        }
        c.n_seeds = j.value("n_seeds", c.n_seeds);
        c.step_counts = j.value("step_counts", c.step_counts);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.sampler.seed = c.seed;
    return c;
}

RunConfig apply_preset(RunConfig c, const std::string& name) {
    const std::uint64_t seed = c.seed;
    if (name == "paper-default" || name == "fast") {
        c.panorama = {128, 256, 64};
        c.sampler = panorama_sampler_defaults();
        if (name == "fast") {
            c.sampler.t_stop = 700;
            c.sampler.n_outer_steps = 8;
        }
    } else if (name == "toy") {
        c.panorama = PanoramaSetup{};
        c.sampler = panorama_sampler_defaults();
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    c.preset = name;
    c.sampler.seed = seed;
    return c;
}

// ---- parsing ----------------------------------------------------------------

ParseResult parse_config(int argc, const char* const* argv) {
    ParseResult result;
    CLI::App app{"Projection-synchronized diffusion sampling on analytic denoisers", "syncsampler"};
    std::string task, config_file, preset, out, emit, gmm, views;
    std::uint64_t seed = 0;
    int n_seeds = -1;
    bool print_config = false;
    app.add_option("--task", task, "panorama | inpaint | ring | divergence | ablation");
    app.add_option("--config", config_file, "JSON config file");
    app.add_option("--preset", preset, "paper-default | fast | toy");
    auto* seed_opt = app.add_option("--seed", seed, "base random seed");
    app.add_option("--out", out, "output directory");
    app.add_option("--emit", emit, "comma list of images,csv,trace");
    app.add_option("--gmm", gmm, "mixture definition file");
    app.add_option("--views", views, "view layout file");
    app.add_option("--n-seeds", n_seeds, "seeds per experiment (0 = task default)");
    app.add_flag("--print-config", print_config, "print the resolved config as JSON and exit");

    if (argc <= 1) {
        result.exit_code = exit_code::usage;
        result.output = app.help();
        return result;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        result.output = app.help();
        return result;
    } catch (const CLI::ParseError& e) {
        result.exit_code = exit_code::usage;
        result.output = std::string(e.what()) + "\n" + app.help();
        return result;
    }

    try {
        RunConfig c;
        nlohmann::json file;
        if (!config_file.empty()) file = read_json_file(config_file);
        std::string chosen = preset;
        if (chosen.empty() && file.is_object() && file.contains("preset") && file["preset"].is_string())
            chosen = file["preset"].get<std::string>();
        c = apply_preset(c, chosen.empty() ? "paper-default" : chosen);
        if (!config_file.empty()) c = RunConfig::from_json(file, c);
        if (!preset.empty()) c.preset = preset;
        if (!task.empty()) c.task = task_from_string(task);
        if (*seed_opt) c.seed = seed;
        c.sampler.seed = c.seed;
        if (!out.empty()) c.out_dir = out;
        if (!gmm.empty()) c.gmm = gmm;
        if (!views.empty()) c.views = views;
        if (n_seeds >= 0) c.n_seeds = n_seeds;
        if (!emit.empty()) {
            c.emit = {false, false, false};
            std::stringstream ss(emit);
            for (std::string item; std::getline(ss, item, ',');) {
                if (item == "images") c.emit.images = true;
                else if (item == "csv") c.emit.csv = true;
                else if (item == "trace") c.emit.trace = true;
                else throw ConfigError("unknown --emit item: " + item);
            }
        }
        c.validate();
        for (const std::string* path : {&c.gmm, &c.views})
            if (!path->empty() && !fs::is_regular_file(*path)) throw IoError("cannot read " + *path);
        result.config = c;
        if (print_config) {
            result.output = c.to_json().dump(2) + "\n";
            return result;
        }
        result.run = true;
    } catch (const ConfigError& e) {
        result.exit_code = exit_code::config_invalid;
        result.output = std::string("config error: ") + e.what() + "\n";
    } catch (const IoError& e) {
        result.exit_code = exit_code::io;
        result.output = std::string("io error: ") + e.what() + "\n";
    }
    return result;
}

// ---- run --------------------------------------------------------------------

namespace {

std::string make_run_dir(const RunConfig& c, std::string& run_id) {
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) throw IoError("cannot create " + c.out_dir + ": " + ec.message());
    static const std::regex pattern(R"((\d{4,})-[0-9a-f]{8})");
    long next = 1;
    for (const auto& entry : fs::directory_iterator(c.out_dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) next = std::max(next, std::stol(m[1].str()) + 1);
    }
    const std::string hash = sha256_hex(c.to_json().dump()).substr(0, 8);
    for (;; ++next) {
        char id[32];
        std::snprintf(id, sizeof id, "%04ld-%s", next, hash.c_str());
        const fs::path dir = fs::path(c.out_dir) / id;
        if (fs::create_directory(dir, ec)) {
            run_id = id;
            return dir.string();
        }
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

void write_manifest(const std::string& dir, std::vector<std::string> files, const std::string& status) {
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    std::string text = "status " + status + "\n";
    for (const auto& f : files) {
        const fs::path p = fs::path(dir) / f;
        if (fs::is_regular_file(p)) text += sha256_hex(read_file(p.string())) + "  " + f + "\n";
    }
    write_text_file(dir + "/MANIFEST", text);
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::string out = "step,t,metric,value\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.value);
        out += std::to_string(r.step) + ',' + std::to_string(r.t) + ',' + r.metric + ',' + buf + '\n';
    }
    return out;
}

void flatten_scalars(const nlohmann::json& j, const std::string& prefix, std::string& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten_scalars(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", j.get<double>());
        out += " " + prefix + "=" + buf;
    }
}

int seeds_for(const RunConfig& c) { return c.n_seeds > 0 ? c.n_seeds : task_default_seeds(c.task); }

// Patch shape for a mixture over d-vectors on views of the given size.
std::optional<Shape> patch_for(std::size_t d, int view_size) {
    const auto v = static_cast<std::size_t>(view_size);
    if (d == v * v) return std::nullopt;
    const auto p = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d))));
    if (p * p != d || v % p) throw ConfigError("mixture dimension does not tile the view size");
    return Shape{p, p, 1};
}

ExperimentReport panorama_report(const RunConfig& c, std::vector<TraceRow>* trace) {
    PanoramaTask task = make_panorama_task(c.panorama);
    if (!c.gmm.empty()) {
        task.gmm = load_gmm_file(c.gmm);
        task.patch = patch_for(task.gmm.dim(), c.panorama.view_size);
    }
    if (!c.views.empty()) {
        const nlohmann::json j = read_json_file(c.views);
        if (j.is_object() && j.contains("sets")) {
            const auto& sets = j["sets"];
            if (!sets.is_array() || sets.size() != 2) throw ConfigError("views file: \"sets\" must hold two lists");
            task.plan = ViewPlan::alternating_sets(views_from_json(sets[0]), views_from_json(sets[1]));
        } else {
            if (c.sampler.toggles.nonoverlap_views)
                throw ConfigError("a single view list cannot alternate; give {\"sets\": [[...], [...]]}");
            task.plan = ViewPlan::fixed_set(views_from_json(j));
        }
    }
    RunHooks hooks;
    hooks.trace = trace;
    const PanoramaOutcome o = run_panorama(task, c.sampler, hooks);
    ExperimentReport r;
    r.experiment = "panorama";
    r.config = c.to_json();
    r.summary = {{"seam_score", o.seam}, {"nll", o.nll}};
    r.rows.push_back({"panorama", to_string(c.sampler.algorithm), c.seed, c.sampler.n_outer_steps, c.sampler.t_stop,
                      "seam_score", o.seam});
    r.rows.push_back({"panorama", to_string(c.sampler.algorithm), c.seed, c.sampler.n_outer_steps, c.sampler.t_stop,
                      "nll", o.nll});
    r.images.push_back({"panorama", o.z});
    return r;
}

ExperimentReport execute(const RunConfig& c, std::vector<TraceRow>* trace) {
    switch (c.task) {
        case Task::Panorama: return panorama_report(c, trace);
        case Task::Inpaint: {
            InpaintingSetup s = default_inpainting_setup();
            if (!c.gmm.empty()) {
                s.gmm = load_gmm_file(c.gmm);
                s.mask = Tensor({s.gmm.dim()});
                s.mask[0] = 1.0;
            }
            s.n_seeds = seeds_for(c);
            s.seed = c.seed;
            return run_inpainting_experiment(s);
        }
        case Task::Ring: {
            RingSetup s = default_ring_setup();
            if (!c.gmm.empty()) {
                s.gmm = load_gmm_file(c.gmm);
                s.window = static_cast<int>(s.gmm.dim());
                s.n = 6 * s.gmm.dim();
            }
            return run_ring_task(s, c.sampler, trace);
        }
        case Task::Divergence: {
            DivergenceSetup s = default_divergence_setup();
            if (!c.gmm.empty()) s.gmm = load_gmm_file(c.gmm);
            s.step_counts = c.step_counts;
            s.n_seeds = seeds_for(c);
            s.seed = c.seed;
            return run_divergence_sweep(s);
        }
        case Task::Ablation: return run_ablation_grid(c.panorama, c.sampler, seeds_for(c), c.seed);
    }
    throw ConfigError("unknown task");
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    std::string run_id, dir;
    try {
        dir = make_run_dir(config, run_id);
    } catch (const std::exception& e) {
        err << "io error: " << e.what() << "\n";
        return exit_code::io;
    }
    std::vector<std::string> written;
    auto fail = [&](int code, const std::string& category, const std::string& what) {
        err << category << " error: " << what << "\n";
        try {
            std::vector<std::string> present;
            for (const auto& e : fs::directory_iterator(dir)) present.push_back(e.path().filename().string());
            present.erase(std::remove(present.begin(), present.end(), "MANIFEST"), present.end());
            write_manifest(dir, present, "partial (" + category + ": " + what + ")");
        } catch (const std::exception&) {
        }
        return code;
    };
    try {
        write_text_file(dir + "/config.json", config.to_json().dump(2) + "\n");
        written.push_back("config.json");
        std::vector<TraceRow> trace;
        ExperimentReport report = execute(config, config.emit.trace ? &trace : nullptr);
        if (config.task == Task::Ring) {
            const nlohmann::json canonical = {{"canonical", report.summary["canonical"]}};
            write_text_file(dir + "/canonical.json", canonical.dump() + "\n");
            written.push_back("canonical.json");
            report.summary.erase("canonical");
        }
        if (config.emit.trace && !trace.empty()) {
            write_text_file(dir + "/trace.csv", trace_csv(trace));
            written.push_back("trace.csv");
        }
        write_report(report, dir, config.emit);
        written.insert(written.end(), report.artifacts.begin(), report.artifacts.end());
        write_manifest(dir, written, "complete");

        std::string line = run_id + " task=" + to_string(config.task);
        flatten_scalars(report.summary, "", line);
        out << line << "\n";
        return exit_code::ok;
    } catch (const ConfigError& e) {
        return fail(exit_code::config_invalid, "config", e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(exit_code::config_invalid, "config", e.what());
    } catch (const IoError& e) {
        return fail(exit_code::io, "io", e.what());
    } catch (const std::ios_base::failure& e) {
        return fail(exit_code::io, "io", e.what());
    } catch (const std::exception& e) {
        return fail(exit_code::runtime, "runtime", e.what());
    }
}

int cli_main(int argc, const char* const* argv) {
    const ParseResult parsed = parse_config(argc, argv);
    if (!parsed.run) {
        (parsed.exit_code == exit_code::ok ? std::cout : std::cerr) << parsed.output;
        return parsed.exit_code;
    }
    return run(parsed.config, std::cout, std::cerr);
}

}  // namespace syncsampler

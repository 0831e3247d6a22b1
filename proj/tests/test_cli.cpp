#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "syncsampler/cli.hpp"

using namespace syncsampler;
namespace fs = std::filesystem;

namespace {

struct Args {
    std::vector<std::string> items;
    std::vector<const char*> ptrs;
    Args(std::initializer_list<std::string> a) : items(a) {
        items.insert(items.begin(), "syncsampler");
        for (const auto& s : items) ptrs.push_back(s.c_str());
    }
    int argc() const { return static_cast<int>(ptrs.size()); }
    const char* const* argv() const { return ptrs.data(); }
};

ParseResult parse(std::initializer_list<std::string> a) {
    const Args args(a);
    return parse_config(args.argc(), args.argv());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("syncsampler_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::vector<fs::path> runs_in(const fs::path& out) {
    std::vector<fs::path> r;
    for (const auto& e : fs::directory_iterator(out)) r.push_back(e.path());
    std::sort(r.begin(), r.end());
    return r;
}

int shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("presets") {
    const ParseResult d = parse({"--task", "panorama", "--preset", "paper-default"});
    REQUIRE(d.run);
    CHECK(d.config.sampler.t_start == 900);
    CHECK(d.config.sampler.t_stop == 270);
    CHECK(d.config.sampler.n_outer_steps == 25);
    const PanoramaTask task = make_panorama_task(d.config.panorama);
    for (const auto& set : task.plan.alternating) {
        CHECK(set.size() == 5);
        for (const auto& v : set) CHECK(v.fov == 72.0);
    }
    CHECK(d.config.panorama.height == 128);
    CHECK(d.config.panorama.width == 256);
    CHECK(d.config.panorama.view_size == 64);

    const ParseResult f = parse({"--preset", "fast"});
    REQUIRE(f.run);
    CHECK(f.config.sampler.t_stop == 700);
    CHECK(f.config.sampler.n_outer_steps == 8);

    CHECK(parse({"--preset", "toy"}).config.panorama.height == PanoramaSetup{}.height);
    CHECK(parse({"--preset", "nope"}).exit_code == exit_code::config_invalid);
}

TEST_CASE("usage and parse errors") {
    const Args none({});
    const ParseResult r = parse_config(none.argc(), none.argv());
    CHECK(r.exit_code == exit_code::usage);
    CHECK(!r.run);
    CHECK(r.output.find("--task") != std::string::npos);
    CHECK(parse({"--bogus"}).exit_code == exit_code::usage);
    CHECK(parse({"--task", "teleport"}).exit_code == exit_code::config_invalid);
    CHECK(parse({"--emit", "images,sound"}).exit_code == exit_code::config_invalid);
    CHECK(parse({"--config", "/nonexistent/run.json"}).exit_code == exit_code::io);
    CHECK(parse({"--gmm", "/nonexistent/gmm.json"}).exit_code == exit_code::io);
}

TEST_CASE("config file and flag precedence") {
    const fs::path dir = fresh_dir("precedence");
    spit(dir / "c.json", R"({"preset": "fast", "seed": 4, "sampler": {"inner_steps": 7}, "task": "ring"})");
    const ParseResult r = parse({"--config", (dir / "c.json").string(), "--seed", "9"});
    REQUIRE(r.run);
    CHECK(r.config.task == Task::Ring);
    CHECK(r.config.sampler.t_stop == 700);  // preset from the file
    CHECK(r.config.sampler.inner_steps == 7);  // file over preset
    CHECK(r.config.seed == 9);  // flag over file
    CHECK(r.config.sampler.seed == 9);

    spit(dir / "bad.json", R"({"sampler": {"toggles": {"max_sigma": false}}})");
    CHECK(parse({"--config", (dir / "bad.json").string()}).exit_code == exit_code::config_invalid);
    spit(dir / "unknown.json", R"({"colour": "blue"})");
    CHECK(parse({"--config", (dir / "unknown.json").string()}).exit_code == exit_code::config_invalid);
    spit(dir / "broken.json", "{");
    CHECK(parse({"--config", (dir / "broken.json").string()}).exit_code == exit_code::config_invalid);
    fs::remove_all(dir);
}

TEST_CASE("printed config is a fixpoint") {
    const fs::path dir = fresh_dir("fixpoint");
    const ParseResult first = parse({"--task", "inpaint", "--preset", "fast", "--seed", "3", "--emit", "csv,trace",
                                     "--n-seeds", "5", "--print-config"});
    REQUIRE(first.exit_code == exit_code::ok);
    REQUIRE(!first.run);
    spit(dir / "echo.json", first.output);
    const ParseResult second = parse({"--config", (dir / "echo.json").string(), "--print-config"});
    CHECK(second.output == first.output);
    CHECK(second.config.to_json() == first.config.to_json());
    fs::remove_all(dir);
}

TEST_CASE("ring smoke run") {
    const fs::path out = fresh_dir("ring");
    const ParseResult r = parse({"--task", "ring", "--out", out.string(), "--seed", "2", "--emit", "images,csv,trace"});
    REQUIRE(r.run);
    std::ostringstream o1, e1, o2, e2;
    REQUIRE(run(r.config, o1, e1) == exit_code::ok);
    REQUIRE(run(r.config, o2, e2) == exit_code::ok);
    const auto dirs = runs_in(out);
    REQUIRE(dirs.size() == 2);
    CHECK(dirs[0].filename().string().substr(0, 5) == "0001-");
    CHECK(dirs[1].filename().string().substr(0, 5) == "0002-");
    CHECK(dirs[0].filename().string().substr(5) == dirs[1].filename().string().substr(5));
    CHECK(o1.str().find("max_abs_deviation_from_tiled_mean=0") != std::string::npos);

    const std::string manifest = slurp(dirs[0] / "MANIFEST");
    CHECK(manifest.rfind("status complete\n", 0) == 0);
    CHECK(manifest == slurp(dirs[1] / "MANIFEST"));
    for (const char* f : {"config.json", "canonical.json", "trace.csv", "ring.csv", "summary.json", "ring_canonical.ppm"}) {
        CHECK(fs::exists(dirs[0] / f));
        CHECK(manifest.find(std::string("  ") + f + "\n") != std::string::npos);
    }
    CHECK(manifest.find(sha256_hex(slurp(dirs[0] / "config.json"))) != std::string::npos);

    const auto canonical = nlohmann::json::parse(slurp(dirs[0] / "canonical.json"))["canonical"];
    REQUIRE(canonical.size() == 48);
    // the last synchronized view set tiles the ramp i/8 exactly
    const auto& last = canonical;
    int matches0 = 0, matches1 = 0;
    for (std::size_t j = 0; j < 48; ++j) {
        matches0 += last[j].get<double>() == static_cast<double>(j % 8) / 8;
        matches1 += last[j].get<double>() == static_cast<double>((j + 4) % 8) / 8;
    }
    CHECK(std::max(matches0, matches1) == 48);

    // the echoed config of a run reproduces the same run hash
    const ParseResult again = parse({"--config", (dirs[0] / "config.json").string()});
    REQUIRE(again.run);
    std::ostringstream o3, e3;
    REQUIRE(run(again.config, o3, e3) == exit_code::ok);
    const auto dirs3 = runs_in(out);
    REQUIRE(dirs3.size() == 3);
    CHECK(dirs3[2].filename().string().substr(5) == dirs[0].filename().string().substr(5));
    CHECK(slurp(dirs3[2] / "MANIFEST") == manifest);
    fs::remove_all(out);
}

TEST_CASE("divergence with two step counts") {
    const fs::path out = fresh_dir("divergence");
    spit(out / "c.json", R"({"task": "divergence", "step_counts": [10, 100], "n_seeds": 4})");
    const ParseResult r = parse({"--config", (out / "c.json").string(), "--out", (out / "runs").string()});
    REQUIRE(r.run);
    std::ostringstream o, e;
    REQUIRE(run(r.config, o, e) == exit_code::ok);
    const auto dirs = runs_in(out / "runs");
    REQUIRE(dirs.size() == 1);
    std::istringstream csv(slurp(dirs[0] / "divergence.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "experiment,variant,seed,step,t,metric,value");
    std::map<std::string, std::set<std::string>> counts;
    int lines = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        REQUIRE(f.size() == 7);
        counts[f[1]].insert(f[3]);
        ++lines;
    }
    CHECK(lines == 4);
    CHECK(counts["max"] == std::set<std::string>{"10", "100"});
    CHECK(counts["zero"] == std::set<std::string>{"10", "100"});
    fs::remove_all(out);
}

TEST_CASE("failures map to distinct exit codes") {
    const fs::path out = fresh_dir("failures");
    // views too small for the whole-view mixture: fails inside the sampler
    spit(out / "views.json", R"([{"azimuth": 0, "fov": 72, "width": 10, "height": 10}])");
    spit(out / "c.json", R"({"preset": "toy", "sampler": {"toggles": {"nonoverlap_views": false}}})");
    const ParseResult r = parse({"--config", (out / "c.json").string(), "--views", (out / "views.json").string(),
                                 "--out", (out / "runs").string()});
    REQUIRE(r.run);
    std::ostringstream o, e;
    CHECK(run(r.config, o, e) == exit_code::runtime);
    const auto dirs = runs_in(out / "runs");
    REQUIRE(dirs.size() == 1);
    CHECK(slurp(dirs[0] / "MANIFEST").rfind("status partial (runtime", 0) == 0);

    spit(out / "blocker", "file in the way");
    RunConfig blocked = r.config;
    blocked.out_dir = (out / "blocker" / "runs").string();
    CHECK(run(blocked, o, e) == exit_code::io);
    fs::remove_all(out);
}

#ifdef SYNCSAMPLER_CLI
TEST_CASE("executable exit codes") {
    const std::string exe = SYNCSAMPLER_CLI;
    CHECK(shell(exe + " > /dev/null 2>&1") == exit_code::usage);
    CHECK(shell(exe + " --nope > /dev/null 2>&1") == exit_code::usage);
    CHECK(shell(exe + " --preset nope > /dev/null 2>&1") == exit_code::config_invalid);
    CHECK(shell(exe + " --config /nonexistent.json > /dev/null 2>&1") == exit_code::io);
    CHECK(shell(exe + " --task ring --print-config > /dev/null 2>&1") == exit_code::ok);
}
#endif

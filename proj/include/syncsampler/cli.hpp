#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncsampler/experiments.hpp"
#include "syncsampler/samplers.hpp"

namespace syncsampler {

enum class Task { Panorama, Inpaint, Ring, Divergence, Ablation };
std::string to_string(Task task);
Task task_from_string(const std::string& name);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int config_invalid = 3;
inline constexpr int runtime = 4;
inline constexpr int io = 5;
}  // namespace exit_code

struct RunConfig {
    Task task = Task::Panorama;
    std::string preset = "paper-default";
    SamplerConfig sampler = panorama_sampler_defaults();
    PanoramaSetup panorama = {128, 256, 64};
    std::string gmm;    // mixture file; empty selects the task's built-in mixture
    std::string views;  // view list file; empty selects the alternating 5-view layout
    std::string out_dir = "runs";
    std::uint64_t seed = 0;
    EmitFlags emit;
    int n_seeds = 0;  // 0 selects the task default
    std::vector<int> step_counts = {10, 100, 1000, 10000};

    // Throws ConfigError.
    void validate() const;
    nlohmann::json to_json() const;
    // Keys absent from j keep their value in base; unknown keys are rejected.
    static RunConfig from_json(const nlohmann::json& j, RunConfig base);
};

// Applies a named preset ("paper-default", "fast", "toy") on top of c.
RunConfig apply_preset(RunConfig c, const std::string& name);

struct ParseResult {
    int exit_code = exit_code::ok;
    bool run = false;  // false: done after printing `output`
    RunConfig config;
    std::string output;
};

// Precedence: defaults, then preset, then config file, then flags.
ParseResult parse_config(int argc, const char* const* argv);

// Executes the task under out_dir/<run-id>/ and prints a one-line summary.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

int cli_main(int argc, const char* const* argv);

std::string sha256_hex(const std::string& bytes);

}  // namespace syncsampler

#pragma once

#include <span>
#include <string>
#include <vector>

namespace syncsampler {

enum class ScheduleKind { LinearBeta, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct BetaRange {
    double start = 1e-4;
    double end = 2e-2;
};

// Cumulative noise schedule. alpha_bar(0) = 1 is the clean end; the paper
// writes the same quantity as alpha_t.
class Schedule {
public:
    Schedule(ScheduleKind kind, std::vector<double> alpha_bar);

    ScheduleKind kind() const { return kind_; }
    int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    double alpha_bar(int t) const;
    std::span<const double> alpha_bar() const { return alpha_bar_; }

private:
    ScheduleKind kind_;
    std::vector<double> alpha_bar_;
};

Schedule make_schedule(ScheduleKind kind, int T, BetaRange range = {});

// Linear schedule over T steps whose betas are the default range scaled by
// 1000/T, i.e. the same continuous-time process sampled on a finer grid.
Schedule make_rescaled_linear_schedule(int T);

// Linearly spaced integer timesteps from t_from to t_to, endpoints inclusive,
// rounded, duplicates removed. Works in both directions.
std::vector<int> timestep_grid(int t_from, int t_to, int n_steps);

}  // namespace syncsampler

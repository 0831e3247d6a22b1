#include "syncsampler/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace syncsampler {

std::string to_string(ScheduleKind kind) {
    return kind == ScheduleKind::LinearBeta ? "linear_beta" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "linear_beta") return ScheduleKind::LinearBeta;
    if (name == "cosine") return ScheduleKind::Cosine;
    throw std::invalid_argument("unknown schedule kind: " + name);
}

Schedule::Schedule(ScheduleKind kind, std::vector<double> alpha_bar)
    : kind_(kind), alpha_bar_(std::move(alpha_bar)) {
    if (alpha_bar_.size() < 2) throw std::invalid_argument("schedule: need T >= 1");
    if (alpha_bar_[0] != 1.0) throw std::invalid_argument("schedule: alpha_bar[0] must be 1");
    for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
        const double a = alpha_bar_[t];
        if (!std::isfinite(a) || a <= 0.0 || a > 1.0)
            throw std::invalid_argument("schedule: alpha_bar out of (0,1] at t=" + std::to_string(t));
        if (!(a < alpha_bar_[t - 1]))
            throw std::invalid_argument("schedule: alpha_bar not strictly decreasing at t=" +
                                        std::to_string(t));
    }
}

double Schedule::alpha_bar(int t) const {
    if (t < 0 || t > steps())
        throw std::out_of_range("schedule: t=" + std::to_string(t) + " outside [0," +
                                std::to_string(steps()) + "]");
    return alpha_bar_[static_cast<std::size_t>(t)];
}

Schedule make_schedule(ScheduleKind kind, int T, BetaRange range) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    std::vector<double> ab(static_cast<std::size_t>(T) + 1);
    ab[0] = 1.0;
    if (kind == ScheduleKind::LinearBeta) {
        double prod = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double beta =
                T == 1 ? range.start
                       : range.start + (range.end - range.start) * (t - 1) / static_cast<double>(T - 1);
            prod *= 1.0 - beta;
            ab[static_cast<std::size_t>(t)] = prod;
        }
    } else {
        // Nichol & Dhariwal squared cosine with offset s = 0.008, betas capped at 0.999.
        const double s = 0.008;
        auto f = [&](double t) {
            const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
            return c * c;
        };
        const double f0 = f(0.0);
        double prod = 1.0;
        for (int t = 1; t <= T; ++t) {
            double beta = 1.0 - (f(t) / f0) / (f(t - 1) / f0);
            beta = std::min(beta, 0.999);
            prod *= 1.0 - beta;
            ab[static_cast<std::size_t>(t)] = prod;
        }
    }
    return Schedule(kind, std::move(ab));
}

Schedule make_rescaled_linear_schedule(int T) {
    const double scale = 1000.0 / T;
    return make_schedule(ScheduleKind::LinearBeta, T, {1e-4 * scale, 2e-2 * scale});
}

std::vector<int> timestep_grid(int t_from, int t_to, int n_steps) {
    if (n_steps < 1) throw std::invalid_argument("timestep_grid: n_steps must be >= 1");
    std::vector<int> grid;
    grid.reserve(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) {
        const double v = t_from + (t_to - t_from) * (static_cast<double>(i) / n_steps);
        const int t = static_cast<int>(std::lround(v));
        if (grid.empty() || grid.back() != t) grid.push_back(t);
    }
    return grid;
}

}  // namespace syncsampler

#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "syncsampler/diffusion.hpp"
#include "syncsampler/rng.hpp"
#include "syncsampler/schedule.hpp"

using namespace syncsampler;
using testsupport::random_tensor;

TEST_CASE("philox4x32-10 known answers") {
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxBlock{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
          PhiloxBlock{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          PhiloxBlock{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("noise streams are addressable and distinct") {
    const NoiseStream a({7, NoisePurpose::Step, 10, 2, 0});
    const NoiseStream b({7, NoisePurpose::Step, 10, 3, 0});
    const Tensor ta = a.normal_tensor({257});
    CHECK(ta[200] == a.normal(200));
    CHECK(ta[3] == a.normal(3));
    CHECK(ta != b.normal_tensor({257}));
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double u = a.uniform(i);
        CHECK((u > 0.0 && u <= 1.0));
    }
    std::vector<int> hits(5, 0);
    for (std::uint64_t i = 0; i < 5000; ++i) ++hits[static_cast<std::size_t>(a.uniform_int(i, 0, 4))];
    for (int h : hits) CHECK(h > 850);
}

TEST_CASE("standard normal draws have unit moments") {
    const NoiseStream s({1, NoisePurpose::Experiment, 0, 0, 0});
    const int n = 200000;
    double m = 0, v = 0;
    for (int i = 0; i < n; ++i) {
        const double x = s.normal(static_cast<std::uint64_t>(i));
        m += x;
        v += x * x;
    }
    m /= n;
    v = v / n - m * m;
    CHECK(std::abs(m) < 0.01);
    CHECK(std::abs(v - 1.0) < 0.01);
}

TEST_CASE("make_schedule") {
    CHECK_THROWS_AS(make_schedule(ScheduleKind::LinearBeta, 0), std::invalid_argument);
    for (auto kind : {ScheduleKind::LinearBeta, ScheduleKind::Cosine}) {
        const Schedule s = make_schedule(kind, 1000);
        CHECK(s.alpha_bar(0) == 1.0);
        for (int t = 1; t <= 1000; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.alpha_bar(1000) > 0.0);
    }
    CHECK(make_schedule(ScheduleKind::LinearBeta, 2).alpha_bar(1) == doctest::Approx(1.0 - 1e-4).epsilon(1e-15));

    // Independent product in long double.
    long double prod = 1.0L;
    for (int t = 1; t <= 1000; ++t) prod *= 1.0L - (1e-4L + (2e-2L - 1e-4L) * (t - 1) / 999.0L);
    const double ab = make_schedule(ScheduleKind::LinearBeta, 1000).alpha_bar(1000);
    CHECK(testsupport::rel_err(ab, static_cast<double>(prod)) < 1e-12);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::LinearBeta, 10).alpha_bar(11), std::out_of_range);
}

TEST_CASE("schedule invariants are enforced") {
    CHECK_THROWS(Schedule(ScheduleKind::LinearBeta, {1.0, 0.5, 0.6}));
    CHECK_THROWS(Schedule(ScheduleKind::LinearBeta, {0.9, 0.5}));
    CHECK_THROWS(Schedule(ScheduleKind::LinearBeta, {1.0, 0.0}));
}

TEST_CASE("timestep grids") {
    CHECK(timestep_grid(900, 270, 25).front() == 900);
    CHECK(timestep_grid(900, 270, 25).back() == 270);
    CHECK(timestep_grid(900, 270, 25).size() == 26);
    CHECK(timestep_grid(700, 0, 8).size() == 9);
    const auto dense = timestep_grid(5, 0, 20);
    CHECK(dense == std::vector<int>{5, 4, 3, 2, 1, 0});
    const auto up = timestep_grid(0, 10, 2);
    CHECK(up == std::vector<int>{0, 5, 10});
}

TEST_CASE("forward_sample and tweedie_x0") {
    const Tensor one({1}, 1.0), zero({1}, 0.0);
    CHECK(forward_sample(one, zero, 0.25)[0] == 0.5);
    CHECK(tweedie_x0(Tensor({1}, 0.5), zero, 0.25)[0] == 1.0);
    std::mt19937_64 gen(1);
    const Tensor x0 = random_tensor(gen, {16}), eps = random_tensor(gen, {16});
    CHECK(forward_sample(x0, eps, 1.0) == x0);
    CHECK(max_abs_difference(forward_sample(x0, eps, 1e-300), eps) < 1e-140);
    CHECK_THROWS_AS(forward_sample(x0, Tensor({15}), 0.5), std::invalid_argument);
    CHECK_THROWS_AS(tweedie_x0(x0, eps, 0.0), SingularityError);
}

TEST_CASE("eps_from_x0 inverts tweedie_x0") {
    const Schedule s = make_schedule(ScheduleKind::LinearBeta, 1000);
    std::mt19937_64 gen(2);
    for (int t : {1, 10, 500, 1000}) {
        const Tensor x = random_tensor(gen, {8}), e = random_tensor(gen, {8});
        CHECK(max_abs_difference(eps_from_x0(x, t, tweedie_x0(x, t, e, s), s), e) < 1e-12);
        const Tensor on_manifold = scaled(std::sqrt(s.alpha_bar(t)), x);
        CHECK(max_abs_difference(eps_from_x0(on_manifold, t, x, s), Tensor({8})) < 1e-15);
    }
    CHECK_THROWS_AS(eps_from_x0(Tensor({1}), Tensor({1}), 1.0), SingularityError);
}

TEST_CASE("ddim_mean") {
    std::mt19937_64 gen(3);
    const Tensor x0 = random_tensor(gen, {6}), e = random_tensor(gen, {6});
    const double ab_prev = 0.3;
    // Maximal sigma removes eps entirely.
    CHECK(ddim_mean(x0, e, ab_prev, std::sqrt(1.0 - ab_prev)) == scaled(std::sqrt(ab_prev), x0));
    CHECK_THROWS_AS(ddim_mean(x0, e, ab_prev, std::sqrt(1.0 - ab_prev) * 1.01), std::invalid_argument);
    // Zero-width step at sigma = 0 returns x_t.
    const double ab = 0.4;
    const Tensor x_t = forward_sample(x0, e, ab);
    CHECK(max_abs_difference(ddim_mean(x0, e, ab, 0.0), x_t) < 1e-15);
}

TEST_CASE("posterior mean written through x_t or through eps agree") {
    const Schedule s = make_schedule(ScheduleKind::LinearBeta, 1000);
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<int> pick(2, 1000);
    for (int i = 0; i < 200; ++i) {
        const int t = pick(gen);
        const double ab_t = s.alpha_bar(t), ab_prev = s.alpha_bar(t - 1);
        const Tensor x0 = random_tensor(gen, {5}), x_t = random_tensor(gen, {5});
        for (SigmaPolicy p : {SigmaPolicy::Zero, SigmaPolicy::DDPM}) {
            const double sg = sigma(p, ab_t, ab_prev);
            // eq. 3 form, coded from scratch
            Tensor ref(x0.shape());
            const double c = std::sqrt(1.0 - ab_prev - sg * sg) / std::sqrt(1.0 - ab_t);
            for (std::size_t k = 0; k < 5; ++k)
                ref[k] = std::sqrt(ab_prev) * x0[k] + c * (x_t[k] - std::sqrt(ab_t) * x0[k]);
            CHECK(max_abs_difference(ddim_mean(x0, eps_from_x0(x_t, x0, ab_t), ab_prev, sg), ref) < 1e-12);
            CHECK(max_abs_difference(ddim_posterior_mean(x0, x_t, ab_t, ab_prev, sg), ref) < 1e-12);
        }
    }
}

TEST_CASE("sigma policies") {
    for (auto kind : {ScheduleKind::LinearBeta, ScheduleKind::Cosine}) {
        const Schedule s = make_schedule(kind, 1000);
        for (int t = 1; t <= 1000; ++t) {
            const double z = sigma(SigmaPolicy::Zero, s, t, t - 1), d = sigma(SigmaPolicy::DDPM, s, t, t - 1),
                         m = sigma(SigmaPolicy::Max, s, t, t - 1);
            CHECK(z == 0.0);
            CHECK(z <= d);
            CHECK(d <= m);
            CHECK(m * m == doctest::Approx(1.0 - s.alpha_bar(t - 1)).epsilon(1e-14));
            const double ab = s.alpha_bar(t), abp = s.alpha_bar(t - 1);
            CHECK(d == doctest::Approx(std::sqrt((1 - abp) / (1 - ab)) * std::sqrt(1 - ab / abp)).epsilon(1e-14));
        }
    }
}

TEST_CASE("max sigma injection does not shrink with the step width") {
    for (int T : {100, 1000, 10000}) {
        const Schedule s = make_rescaled_linear_schedule(T);
        for (int n : {10, T / 2, T}) {
            const auto grid = timestep_grid(T, 0, n);
            // compare at the grid point closest to the middle of the process
            const int t_prev = grid[grid.size() / 2];
            const int t = grid[grid.size() / 2 - 1];
            CHECK(sigma(SigmaPolicy::Max, s, t, t_prev) == std::sqrt(1.0 - s.alpha_bar(t_prev)));
            CHECK(sigma(SigmaPolicy::Max, s, t, t_prev) > 0.5);
        }
    }
}

TEST_CASE("max_sigma_mean") {
    CHECK(max_sigma_mean(Tensor({3}, 2.0), 1.0) == Tensor({3}, 2.0));
    CHECK(max_sigma_mean(Tensor({3}), 0.3) == Tensor({3}));
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(1e-3, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double ab = u(gen);
        const Tensor x0 = random_tensor(gen, {4}), e = random_tensor(gen, {4}, 10.0);
        CHECK(max_abs_difference(max_sigma_mean(x0, ab), ddim_mean(x0, e, ab, std::sqrt(1.0 - ab))) < 1e-14);
    }
}

TEST_CASE("ddim_step") {
    const Schedule s = make_schedule(ScheduleKind::LinearBeta, 1000);
    std::mt19937_64 gen(6);
    const Tensor x0 = random_tensor(gen, {4}), e = random_tensor(gen, {4});
    const NoiseStream n1({9, NoisePurpose::Step, 500, 0, 0});
    CHECK(ddim_step(x0, e, SigmaPolicy::Zero, s, 500, 480, n1) == ddim_step(x0, e, SigmaPolicy::Zero, s, 500, 480, n1));
    CHECK(ddim_step(x0, e, SigmaPolicy::Max, s, 500, 480, n1) == ddim_step(x0, e, SigmaPolicy::Max, s, 500, 480, n1));
    // final step lands on x0 under every policy
    for (auto p : {SigmaPolicy::Zero, SigmaPolicy::DDPM, SigmaPolicy::Max})
        CHECK(max_abs_difference(ddim_step(x0, e, p, s, 1, 0, n1), x0) < 1e-15);
}

namespace {
struct Moments {
    double mean, var;
};
Moments step_moments(SigmaPolicy p, const Schedule& s, int t, int tp, double x0, double eps, int draws) {
    double m = 0, v = 0;
    const Tensor tx0({1}, x0), te({1}, eps);
    for (int i = 0; i < draws; ++i) {
        const NoiseStream n({11, NoisePurpose::Experiment, static_cast<std::uint32_t>(t), 0,
                             static_cast<std::uint32_t>(i)});
        const double x = ddim_step(tx0, te, p, s, t, tp, n)[0];
        m += x;
        v += x * x;
    }
    m /= draws;
    return {m, v / draws - m * m};
}
}  // namespace

TEST_CASE("stochastic step moments") {
    const Schedule s = make_schedule(ScheduleKind::LinearBeta, 1000);
    const int t = 600, tp = 599;
    const Moments mx = step_moments(SigmaPolicy::Max, s, t, tp, 0.7, 1.3, 100000);
    const double abp = s.alpha_bar(tp);
    CHECK(std::abs(mx.var / (1.0 - abp) - 1.0) < 0.02);
    CHECK(std::abs(mx.mean - std::sqrt(abp) * 0.7) < 4.0 * std::sqrt((1.0 - abp) / 100000));
    const Moments md = step_moments(SigmaPolicy::DDPM, s, t, tp, 0.7, 1.3, 100000);
    const double sd = sigma(SigmaPolicy::DDPM, s, t, tp);
    CHECK(std::abs(md.var / (sd * sd) - 1.0) < 0.02);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hcran/dinkelbach.hpp"
#include "hcran/polyblock.hpp"
#include "hcran/scale.hpp"
#include "hcran/scenario.hpp"
#include "hcran/traffic.hpp"
#include "support.hpp"

using namespace hcran;
using hcran::testing::random_channel;
using hcran::testing::random_powers;
using hcran::testing::small_network;

namespace {

MonotoneProblem interval_problem(double cap) {
    MonotoneProblem p;
    p.upper = {1.0};
    p.objective = [](std::span<const double> x) { return x[0]; };
    p.in_normal = [cap](std::span<const double> x) { return x[0] <= cap; };
    p.in_conormal = [](std::span<const double>) { return true; };
    return p;
}

MonotoneProblem simplex_problem(double x_floor) {
    MonotoneProblem p;
    p.upper = {1.0, 1.0};
    p.objective = [](std::span<const double> x) { return x[0] + x[1]; };
    p.in_normal = [](std::span<const double> x) { return x[0] + x[1] <= 1.0; };
    p.in_conormal = [x_floor](std::span<const double> x) { return x[0] >= x_floor; };
    return p;
}

ChannelState one_cell_channel() {
    ChannelState ch{Tensor3(1, 2, 1), Tensor3(1, 2, 1, 1e-2)};
    ch.gamma(0, 0, 0) = 1.7;
    ch.gamma(0, 1, 0) = 0.3;
    return ch;
}

// Samples points of the canonical box that lie in both sets, lifting auxiliaries so they are not trivially low.
std::vector<std::vector<double>> feasible_samples(const CanonicalProblem& cp, std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> out;
    const auto up = cp.upper();
    for (int attempt = 0; attempt < 200 * count && static_cast<int>(out.size()) < count; ++attempt) {
        std::vector<double> x(up.begin(), up.end());
        for (std::size_t i = 0; i < cp.power_count(); ++i) x[i] *= unit(rng);
        cp.lift(x);
        if (cp.in_normal(x) && cp.in_conormal(x)) out.push_back(std::move(x));
    }
    return out;
}

}  // namespace

TEST_CASE("projection onto an interval") {
    const MonotoneProblem p = interval_problem(0.7);
    const std::vector<double> v{1.0};
    const Projection pr = project(p, v, 40);
    CHECK(pr.lambda_lo == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(p.in_normal(std::vector<double>{pr.lambda_lo}));
    CHECK_FALSE(p.in_normal(std::vector<double>{pr.lambda_hi}));
}

TEST_CASE("projection of a vertex already inside is the identity") {
    const MonotoneProblem p = interval_problem(0.7);
    const Projection pr = project(p, std::vector<double>{0.5}, 40);
    CHECK(pr.lambda_lo == 1.0);
    CHECK(pr.lambda_hi == 1.0);
}

TEST_CASE("projection onto a simplex edge") {
    const MonotoneProblem p = simplex_problem(0.0);
    const Projection pr = project(p, std::vector<double>{1.0, 1.0}, 40);
    CHECK(pr.lambda_lo == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(pr.lambda_hi - pr.lambda_lo <= std::ldexp(1.0, -40));
}

TEST_CASE("projection brackets the boundary on canonical problems") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        NetworkConfig cfg = small_network(1 + trial % 2, 2, 1 + trial % 2, {trial % 3 == 0, false});
        ChannelState ch = random_channel(cfg, rng);
        const CanonicalProblem cp(ch, cfg, 2.0 * trial / 30.0);
        const MonotoneProblem mp = cp.as_monotone();
        std::vector<double> v(mp.upper);
        for (double& c : v) c *= unit(rng);
        const Projection pr = project(mp, v, 40);
        std::vector<double> lo(v), hi(v);
        for (std::size_t i = 0; i < v.size(); ++i) {
            lo[i] *= pr.lambda_lo;
            hi[i] *= pr.lambda_hi;
        }
        CHECK(mp.in_normal(lo));
        if (pr.lambda_hi < 1.0) CHECK_FALSE(mp.in_normal(hi));
    }
}

TEST_CASE("maximising over an interval") {
    const PolyblockResult r = polyblock_solve(interval_problem(0.7));
    CHECK(r.status == PolyblockStatus::Converged);
    CHECK(r.value == doctest::Approx(0.7).epsilon(r.epsilon + 1e-9));
    CHECK(r.value <= 0.7);
}

TEST_CASE("linear objective over a simplex with a floor") {
    PolyblockOptions opts;
    opts.epsilon_abs = 1e-3;
    const PolyblockResult r = polyblock_solve(simplex_problem(0.2), opts);
    REQUIRE(r.status == PolyblockStatus::Converged);
    CHECK(r.value >= 1.0 - 1e-3 - 1e-9);
    CHECK(r.value <= 1.0 + 1e-12);
    REQUIRE(r.point.size() == 2);
    CHECK(r.point[0] >= 0.2);
}

TEST_CASE("an empty co-normal set is reported as suspected infeasibility") {
    MonotoneProblem p = simplex_problem(0.0);
    p.in_conormal = [](std::span<const double> x) { return x[0] >= 0.8 && x[1] >= 0.8; };
    PolyblockOptions opts;
    opts.max_iterations = 2000;
    const PolyblockResult r = polyblock_solve(p, opts);
    CHECK(r.status == PolyblockStatus::InfeasibilitySuspected);
    CHECK(r.point.empty());
}

TEST_CASE("canonical objective reproduces the rate surplus") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 40; ++trial) {
        NetworkConfig cfg = small_network(1 + trial % 2, 2 + trial % 2, 1 + trial % 2);
        ChannelState ch = random_channel(cfg, rng);
        const double E = 3.0 * (trial % 5);
        const CanonicalProblem cp(ch, cfg, E);
        PowerAllocation a{random_powers(cfg, rng)};
        const std::vector<double> x = cp.embed(a.p);
        const double direct = surplus(a, ch, cfg, E) + cp.offset();
        CHECK(cp.objective(x) == doctest::Approx(direct).epsilon(1e-9).scale(1.0 + std::abs(direct)));
        const Tensor3 back = cp.powers(x);
        for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == doctest::Approx(a.p[i]).epsilon(1e-12));
    }
}

TEST_CASE("all-zero powers give the all-noise objective") {
    NetworkConfig cfg = small_network(1, 2, 1);
    const ChannelState ch = one_cell_channel();
    const CanonicalProblem cp(ch, cfg, 1.0);
    std::vector<double> x(cp.dimension(), 0.0);
    CHECK(cp.objective(x) == doctest::Approx(cp.q_plus(Tensor3(1, 2, 1))));
}

TEST_CASE("normal sets are downward closed and co-normal sets upward closed") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int normal_violations = 0, conormal_violations = 0, objective_violations = 0;
    for (int inst = 0; inst < 12; ++inst) {
        NetworkConfig cfg = small_network(1 + inst % 2, 2 + inst % 2, 1 + (inst / 2) % 2, {inst % 2 == 0, false, false});
        ChannelState ch = random_channel(cfg, rng);
        const CanonicalProblem cp(ch, cfg, 1.5 * (inst % 4));
        const auto up = cp.upper();
        for (int s = 0; s < 2000; ++s) {
            std::vector<double> hi(up.begin(), up.end()), lo(up.size());
            for (std::size_t i = 0; i < hi.size(); ++i) {
                hi[i] *= unit(rng);
                lo[i] = hi[i] * (unit(rng) < 0.5 ? 1.0 : unit(rng));
            }
            if (cp.in_normal(hi) && !cp.in_normal(lo)) ++normal_violations;
            if (cp.in_conormal(lo) && !cp.in_conormal(hi)) ++conormal_violations;
            if (cp.objective(lo) > cp.objective(hi)) ++objective_violations;
        }
    }
    CHECK(normal_violations == 0);
    CHECK(conormal_violations == 0);
    CHECK(objective_violations == 0);
}

TEST_CASE("outer bounds never cut off a feasible point and traces are monotone") {
    std::mt19937_64 rng(14);
    PolyblockOptions opts;
    opts.max_iterations = 3000;
    opts.local_incumbent = false;
    for (int inst = 0; inst < 8; ++inst) {
        CAPTURE(inst);
        NetworkConfig cfg = small_network(1, 2 + inst % 2, 1 + inst % 2, {inst % 2 == 1, false, false});
        ChannelState ch = random_channel(cfg, rng, 1e-1);
        const CanonicalProblem cp(ch, cfg, 0.5 * inst);
        const PolyblockResult r = polyblock_solve(cp.as_monotone(), opts);
        REQUIRE_FALSE(r.bound_trace.empty());
        for (std::size_t i = 1; i < r.bound_trace.size(); ++i) {
            CHECK(r.bound_trace[i] <= r.bound_trace[i - 1]);
            CHECK(r.incumbent_trace[i] >= r.incumbent_trace[i - 1]);
        }
        const double final_bound = r.bound_trace.back();
        for (const auto& x : feasible_samples(cp, rng, 400)) CHECK(cp.objective(x) <= final_bound + 1e-9);
        if (!r.point.empty()) {
            CHECK(cp.in_normal(r.point));
            CHECK(cp.in_conormal(r.point));
            CHECK(r.value <= final_bound);
        }
    }
}

TEST_CASE("outer bounds stay above locally optimised points") {
    PolyblockOptions opts;
    opts.max_iterations = 1500;
    opts.local_incumbent = false;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        CAPTURE(seed);
        const TinyInstance t = tiny_instance(seed);
        for (double E : {0.0, 5.0}) {
            CAPTURE(E);
            const CanonicalProblem cp(t.ch, t.cfg, E);
            if (cp.dimension() > 8) continue;
            ScaleSolver local;
            const InnerResult lr = local.solve_fixed_E(t.ch, t.cfg, E, local.initial_point(t.ch, t.cfg));
            const std::vector<double> witness = cp.embed(lr.alloc.p);
            if (!cp.in_normal(witness) || !cp.in_conormal(witness)) continue;
            const double wf = cp.objective(witness);
            const PolyblockResult r = polyblock_solve(cp.as_monotone(), opts);
            CHECK(r.bound_trace.back() >= wf - 1e-9 * (1.0 + std::abs(wf)));
        }
    }
}

TEST_CASE("shrinking a vertex keeps every feasible point above the target") {
    std::mt19937_64 rng(15);
    for (int inst = 0; inst < 10; ++inst) {
        NetworkConfig cfg = small_network(1, 2 + inst % 2, 1 + inst % 2, {inst % 3 == 0, false, false});
        ChannelState ch = random_channel(cfg, rng, 1e-1);
        const CanonicalProblem cp(ch, cfg, 0.7 * inst);
        const MonotoneProblem mp = cp.as_monotone();
        const auto samples = feasible_samples(cp, rng, 300);
        if (samples.empty()) continue;
        std::vector<double> values;
        for (const auto& x : samples) values.push_back(cp.objective(x));
        std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
        const double target = values[values.size() / 2];
        std::vector<double> v(mp.upper);
        REQUIRE(reduce_vertex(mp, v, target, 30));
        for (const auto& x : samples) {
            if (cp.objective(x) < target) continue;
            for (std::size_t i = 0; i < v.size(); ++i) CHECK(x[i] <= v[i] * (1.0 + 1e-12) + 1e-15);
        }
    }
}

TEST_CASE("sum rate on one cell with two users matches a dense grid") {
    NetworkConfig cfg = small_network(1, 2, 1);
    const ChannelState ch = one_cell_channel();
    const CanonicalProblem cp(ch, cfg, 0.0);
    REQUIRE(cp.dimension() == 3);
    constexpr int kLevels = 50;
    PowerAllocation g{Tensor3(1, 2, 1)};
    const double mask = cfg.p_mask(0, 0, 0);
    double grid_best = 0.0;
    for (int a = 0; a < kLevels; ++a)
        for (int b = 0; b < kLevels; ++b) {
            g.p[0] = mask * a / (kLevels - 1);
            g.p[1] = mask * b / (kLevels - 1);
            if (check_feasibility(g, ch, cfg, {}).feasible()) grid_best = std::max(grid_best, surplus(g, ch, cfg, 0.0));
        }
    PolyblockOptions opts;
    opts.local_incumbent = false;
    opts.epsilon_abs = 1e-3;
    const PolyblockResult r = polyblock_solve(cp.as_monotone(), opts);
    REQUIRE(r.status == PolyblockStatus::Converged);
    const double found = r.value - cp.offset();
    CHECK(found == doctest::Approx(grid_best).epsilon(0.02));
    CHECK(found >= grid_best - 1e-3 - 1e-9);
}

TEST_CASE("efficiency on one cell with two users matches a dense grid") {
    NetworkConfig cfg = small_network(1, 2, 1);
    const double gains[][2] = {{1.7, 0.3}, {0.2, 2.5}, {5.0, 4.0}, {0.05, 0.9}};
    for (const auto& gp : gains) {
        CAPTURE(gp[0]);
        CAPTURE(gp[1]);
        ChannelState ch{Tensor3(1, 2, 1), Tensor3(1, 2, 1, 1e-2)};
        ch.gamma(0, 0, 0) = gp[0];
        ch.gamma(0, 1, 0) = gp[1];
        constexpr int kLevels = 50;
        PowerAllocation g{Tensor3(1, 2, 1)};
        const double mask = cfg.p_mask(0, 0, 0);
        double grid_best = 0.0;
        for (int a = 0; a < kLevels; ++a)
            for (int b = 0; b < kLevels; ++b) {
                g.p[0] = mask * a / (kLevels - 1);
                g.p[1] = mask * b / (kLevels - 1);
                if (check_feasibility(g, ch, cfg, {}).feasible())
                    grid_best = std::max(grid_best, energy_efficiency(g, ch, cfg).ee_E);
            }
        PolyblockOptions opts;
        opts.local_incumbent = false;
        PolyblockSolver global(opts);
        const DinkelbachTrace tr = solve(ch, cfg, global);
        CHECK(tr.globally_optimal);
        CHECK(check_feasibility(tr.final, ch, cfg, {}).feasible());
        CHECK(tr.E_star == doctest::Approx(grid_best).epsilon(0.02));
    }
}

TEST_CASE("global value dominates the local one on a one-cell instance") {
    NetworkConfig cfg = small_network(1, 2, 1);
    const ChannelState ch = one_cell_channel();
    ScaleSolver local;
    const DinkelbachTrace lt = solve(ch, cfg, local);
    PolyblockOptions opts;
    opts.local_incumbent = false;
    PolyblockSolver global(opts);
    const DinkelbachTrace gt = solve(ch, cfg, global);
    double eps = 0.0;
    for (const auto& h : global.history()) eps = std::max(eps, h.epsilon);
    const double eps_ee = eps / energy_efficiency(gt.final, ch, cfg).total_power_P;
    CHECK(gt.E_star >= lt.E_star - eps_ee - cfg.tol.xi);
    CHECK(check_feasibility(gt.final, ch, cfg, {}).feasible());
}

TEST_CASE("the dimension guard refuses large instances unless allowed") {
    NetworkConfig cfg = small_network(2, 3, 4);
    std::mt19937_64 rng(16);
    ChannelState ch = random_channel(cfg, rng);
    PolyblockOptions opts;
    opts.max_dimension = 4;
    PolyblockSolver solver(opts);
    CHECK_THROWS_AS(solver.initial_point(ch, cfg), DimensionTooLarge);
}

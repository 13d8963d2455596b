#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "hcran/parallel.hpp"

using namespace hcran;

namespace {

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("parallel sweeps match the serial reference bit for bit on fuzzed plans") {
    std::mt19937_64 rng(21);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t out_size = 1 + rng() % 400;
        const std::size_t tasks = rng() % (out_size + 1);
        std::vector<std::size_t> slots(out_size);
        std::iota(slots.begin(), slots.end(), std::size_t{0});
        std::shuffle(slots.begin(), slots.end(), rng);
        slots.resize(tasks);

        std::vector<double> snapshot(out_size);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (double& v : snapshot) v = u(rng);
        auto update = [&](std::size_t i) {
            const std::size_t t = slots[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < snapshot.size(); j += 7) acc += std::sin(snapshot[j] * static_cast<double>(t + 1));
            return std::exp(-std::abs(acc)) + snapshot[t] * 1e-3;
        };

        std::vector<double> serial(out_size, -1.0);
        serial_sweep(SweepPlan::build(slots, out_size, 1), std::span<double>(serial), update);
        for (int workers : {1, 2, 4, 8}) {
            std::vector<double> par(out_size, -1.0);
            parallel_sweep(SweepPlan::build(slots, out_size, workers), std::span<double>(par), update);
            if (!bit_identical(serial, par)) ++mismatches;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("untouched outputs keep their previous values") {
    const SweepPlan plan = SweepPlan::build({4, 1}, 6, 4);
    std::vector<double> out(6, 9.0);
    parallel_sweep(plan, std::span<double>(out), [](std::size_t i) { return static_cast<double>(i); });
    CHECK(out == std::vector<double>{9.0, 1.0, 9.0, 9.0, 0.0, 9.0});
}

TEST_CASE("an empty plan leaves the output alone") {
    const SweepPlan plan = SweepPlan::build({}, 3, 8);
    CHECK(plan.tasks() == 0);
    const std::vector<double> out = parallel_sweep(plan, [](std::size_t) { return 1.0; });
    CHECK(out == std::vector<double>(3, 0.0));
}

TEST_CASE("malformed plans are rejected") {
    CHECK_THROWS_AS(SweepPlan::build({0, 1, 0}, 3, 2), PlanError);
    CHECK_THROWS_AS(SweepPlan::build({3}, 3, 2), PlanError);
    CHECK_THROWS_AS(SweepPlan::build({0}, 1, 0), PlanError);
    const SweepPlan plan = SweepPlan::build({2}, 3, 2);
    std::vector<double> small(2);
    CHECK_THROWS_AS(parallel_sweep(plan, std::span<double>(small), [](std::size_t) { return 0.0; }), PlanError);
}

TEST_CASE("deterministic sum does not depend on the worker count") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (std::size_t n : {0u, 1u, 1023u, 1024u, 1025u, 5000u, 70001u}) {
        std::vector<double> v(n);
        for (double& x : v) x = u(rng) * std::pow(10.0, static_cast<double>(rng() % 12) - 6.0);
        const double ref = deterministic_sum(v, 1);
        for (int workers : {2, 3, 4, 8}) {
            const double s = deterministic_sum(v, workers);
            CHECK(std::memcmp(&s, &ref, sizeof s) == 0);
        }
        long double exact = 0.0L;
        for (double x : v) exact += x;
        CHECK(ref == doctest::Approx(static_cast<double>(exact)).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("benchmark workloads agree across worker counts") {
    const SweepWorkload w({3, 16, 6}, 7);
    std::vector<double> one(w.tasks()), four(w.tasks());
    w.run(1, one);
    w.run(4, four);
    CHECK(bit_identical(one, four));

    const BenchGridPoint grid[] = {{2, 8, 4}};
    const BenchReport r = benchmark(grid, 2, 2, 3);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].max_divergence == 0.0);
    CHECK(r.rows[0].serial_ms >= 0.0);
    CHECK(r.rows[0].workers == 2);
}

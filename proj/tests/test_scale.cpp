#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hcran/scale.hpp"
#include "hcran/scenario.hpp"
#include "hcran/traffic.hpp"
#include "support.hpp"

using namespace hcran;
using hcran::testing::random_channel;
using hcran::testing::random_powers;
using hcran::testing::small_network;

namespace {

/// Maximiser of a unimodal function on [lo, hi].
template <class F>
double golden_section(F f, double lo, double hi, int steps = 200) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < steps; ++i) {
        if (fc < fd) {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        }
    }
    const double x = 0.5 * (a + b);
    return f(lo) > f(x) ? lo : (f(hi) > f(x) ? hi : x);
}

/// Sum of weighted log2 SINRs of every link except `skip`, evaluated from scratch.
double others_log_sinr(const Tensor3& p, const ChannelState& ch, const NetworkConfig& cfg,
                       const ScaleCoefficients& coeffs, std::size_t skip) {
    double s = 0.0;
    for (std::size_t m = 0; m < p.rrhs(); ++m)
        for (std::size_t k = 0; k < p.users(); ++k)
            for (std::size_t n = 0; n < p.subcarriers(); ++n) {
                const std::size_t a = p.index(m, k, n);
                if (a == skip) continue;
                const double z = sinr(PowerAllocation{p}, ch, m, k, n);
                s += cfg.weight(m, k) * coeffs.alpha[a] * std::log2(z);
            }
    return s;
}

bool segments_nondecreasing(const InnerStats& st) {
    const auto& t = st.surrogate_trace;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const bool starts_run = std::find(st.trace_breaks.begin(), st.trace_breaks.end(), i) != st.trace_breaks.end();
        if (!starts_run && t[i] < t[i - 1] - 1e-9 * std::abs(t[i - 1])) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("log lower-bound coefficients") {
    auto [a1, b1] = scale_coeffs(1.0);
    CHECK(a1 == doctest::Approx(0.5));
    CHECK(b1 == doctest::Approx(1.0));

    auto [a3, b3] = scale_coeffs(3.0);
    CHECK(a3 == doctest::Approx(0.75));
    CHECK(b3 == doctest::Approx(2.0 - 0.75 * std::log2(3.0)));
    CHECK(b3 == doctest::Approx(0.81128).epsilon(1e-5));

    auto [ab, bb] = scale_coeffs(1e12);
    CHECK(ab == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(bb == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));

    auto [a0, b0] = scale_coeffs(0.0);
    CHECK(a0 == 1.0);
    CHECK(b0 == 0.0);
}

TEST_CASE("the log bound never exceeds the true rate and touches it at the expansion point") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> lz(-12.0, 12.0);
    for (int trial = 0; trial < 100000; ++trial) {
        const double z0 = std::pow(10.0, lz(rng)), z = std::pow(10.0, lz(rng));
        const auto [a, b] = scale_coeffs(z0);
        CHECK(a > 0.0);
        CHECK(a <= 1.0);
        const double truth = std::log2(1.0 + z);
        CHECK(a * std::log2(z) + b <= truth + 1e-12 * std::max(1.0, truth));
        const double at = a * std::log2(z0) + b, want = std::log2(1.0 + z0);
        CHECK(std::abs(at - want) <= 1e-12 * std::max(1.0, want));
    }
}

TEST_CASE("approximate rate") {
    NetworkConfig cfg = small_network(1, 1, 1);
    ChannelState ch{Tensor3(1, 1, 1, 1.0), Tensor3(1, 1, 1, 1.0)};
    PowerAllocation a{Tensor3(1, 1, 1, 8.0)};
    ScaleCoefficients hs = ScaleCoefficients::high_sir(1, 1, 1);
    CHECK(approx_rate(a, ch, hs, 0, 0, 0) == doctest::Approx(3.0));
    CHECK(approx_rate(a, ch, hs, 0, 0, 0) <= user_rate(a, ch, 0, 0, 0));

    auto [al, be] = scale_coeffs(8.0);
    ScaleCoefficients tight{Tensor3(1, 1, 1, al), Tensor3(1, 1, 1, be)};
    CHECK(approx_rate(a, ch, tight, 0, 0, 0) == doctest::Approx(std::log2(9.0)));

    a.p(0, 0, 0) = 0.0;
    CHECK(std::isinf(approx_rate(a, ch, tight, 0, 0, 0)));
}

TEST_CASE("decoding-order linearisation") {
    std::mt19937_64 rng(103);
    SUBCASE("exact at the expansion point and a minorant elsewhere") {
        for (int trial = 0; trial < 300; ++trial) {
            NetworkConfig cfg = small_network(2, 3, 2);
            ChannelState ch = random_channel(cfg, rng);
            PowerAllocation prev{random_powers(cfg, rng)};
            const std::size_t k = 0, w = 1, m = 0, n = trial % 2;
            const DcLinearization lin = dc_linearize(prev, ch, m, k, w, n);
            const double exact = ch.gamma(m, k, n) * prev.p(m, k, n) * prev.p(m, w, n) *
                                 cross_interference(prev.p, ch, m, w, n);
            CHECK(lin.value == doctest::Approx(exact).epsilon(1e-13));
            CHECK(lin.evaluate(prev.p, prev.p) == doctest::Approx(exact).epsilon(1e-13));

            Tensor3 moved = prev.p;
            std::uniform_real_distribution<double> f(0.2, 3.0);
            for (auto& v : moved.values()) v *= f(rng);
            const double g = ch.gamma(m, k, n) * moved(m, k, n) * moved(m, w, n) *
                             cross_interference(moved, ch, m, w, n);
            CHECK(lin.evaluate(prev.p, moved) <= g * (1.0 + 1e-12) + 1e-300);
        }
    }
    SUBCASE("no cross-RRH power means nothing to linearise") {
        NetworkConfig cfg = small_network(2, 2, 1);
        ChannelState ch = random_channel(cfg, rng);
        PowerAllocation prev{Tensor3(2, 2, 1)};
        prev.p(0, 0, 0) = 0.3;
        prev.p(0, 1, 0) = 0.2;
        const DcLinearization lin = dc_linearize(prev, ch, 0, 0, 1, 0);
        CHECK(lin.value == 0.0);
        // Slopes in log-power coordinates vanish: every term carries a zero power factor.
        for (const auto& [i, g] : lin.gradient) CHECK(g * prev.p[i] == 0.0);
        Tensor3 moved = prev.p;
        moved(1, 0, 0) = 0.4;
        CHECK(lin.evaluate(prev.p, moved) == 0.0);
    }
}

TEST_CASE("closed-form power updates") {
    SUBCASE("elastic update with only the rate and power terms") {
        ScaleDualTerms t;
        t.rate_weight = 1.0 / std::numbers::ln2;
        t.power_cost = 1.0 / std::numbers::ln2;
        const UpdateOutcome u = elastic_power_update(t, 10.0);
        CHECK(u.power == doctest::Approx(1.0));
        CHECK_FALSE(u.flagged);
    }
    SUBCASE("clamped at the mask") {
        ScaleDualTerms t;
        t.rate_weight = 5.0;
        t.power_cost = 1.0;
        CHECK(elastic_power_update(t, 0.25).power == 0.25);
    }
    SUBCASE("a vanishing denominator is flagged and returns the mask") {
        ScaleDualTerms t;
        t.rate_weight = 1.0;
        const UpdateOutcome u = elastic_power_update(t, 0.5);
        CHECK(u.flagged);
        CHECK(u.power == 0.5);
    }
    SUBCASE("an unconstrained streaming user gets no power") {
        ScaleDualTerms t;
        t.budget = 1.0;
        CHECK(streaming_power_update(t, 1.0).power == 0.0);
    }
    SUBCASE("streaming power does not decrease with its rate multiplier") {
        double last = 0.0;
        for (double zeta = 0.0; zeta < 5.0; zeta += 0.25) {
            ScaleDualTerms t;
            t.rate_weight = zeta * 0.8 / std::numbers::ln2;
            t.budget = 0.7;
            t.same_rrh = 0.2;
            const double p = streaming_power_update(t, 2.0).power;
            CHECK(p >= last);
            last = p;
        }
    }
}

TEST_CASE("interference pressure equals the derivative of the other links' log rates") {
    std::mt19937_64 rng(107);
    for (int trial = 0; trial < 40; ++trial) {
        NetworkConfig cfg = small_network(2, 2, 1 + trial % 2);
        ChannelState ch = random_channel(cfg, rng);
        Tensor3 p = random_powers(cfg, rng);
        for (auto& v : p.values()) v = std::max(v, 1e-4);
        ScaleCoefficients coeffs{Tensor3(p.rrhs(), p.users(), p.subcarriers()),
                                 Tensor3(p.rrhs(), p.users(), p.subcarriers())};
        std::uniform_real_distribution<double> u(0.05, 1.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            coeffs.alpha[i] = u(rng);
            coeffs.beta[i] = u(rng);
        }
        DualState duals = DualState::zeros(cfg.num_rrhs(), cfg.num_users());
        duals.xi = {0.3, 0.9};
        const double E = 1.7;
        SweepSnapshot::Inputs in;
        in.ch = &ch;
        in.cfg = &cfg;
        in.E = E;
        in.p = &p;
        in.coeffs = &coeffs;
        in.duals = &duals;
        const SweepSnapshot snap(in);

        for (std::size_t m = 0; m < p.rrhs(); ++m)
            for (std::size_t k = 0; k < p.users(); ++k)
                for (std::size_t n = 0; n < p.subcarriers(); ++n) {
                    const std::size_t a = p.index(m, k, n);
                    const ScaleDualTerms t = snap.terms(m, k, n);
                    CHECK(t.rate_weight == doctest::Approx(coeffs.alpha[a] / std::numbers::ln2));
                    CHECK(t.power_cost == doctest::Approx(E * cfg.rrhs[m].eta));
                    CHECK(t.budget == doctest::Approx(duals.xi[m]));

                    const double h = 1e-6 * p[a];
                    Tensor3 up = p, down = p;
                    up[a] += h;
                    down[a] -= h;
                    const double slope = (others_log_sinr(up, ch, cfg, coeffs, a) -
                                          others_log_sinr(down, ch, cfg, coeffs, a)) / (2.0 * h);
                    CHECK(t.same_rrh + t.cross_rrh == doctest::Approx(-slope).epsilon(1e-5));

                    const double expect = t.rate_weight / (t.power_cost + t.budget + t.same_rrh + t.cross_rrh);
                    CHECK(snap.update(m, k, n).power == doctest::Approx(std::min(expect, cfg.p_mask[a])));
                }
    }
}

TEST_CASE("dual update") {
    DualState d = DualState::zeros(2, 2);
    ConstraintSlacks s;
    s.budget = {{-0.5, 1.0}, {-0.1, 1.0}};
    s.min_rate = {{-1.0, 1.0}, {-2.0, 1.0}};
    StepRule rule;

    SUBCASE("slack constraints keep zero multipliers at zero") {
        const DualState out = dual_update(d, s, rule);
        CHECK(out.xi == std::vector<double>{0.0, 0.0});
        CHECK(out.zeta == std::vector<double>{0.0, 0.0});
    }
    SUBCASE("a violated budget moves its multiplier by step times violation") {
        s.budget[1] = {0.4, 2.0};
        rule.v = 4;
        const DualState out = dual_update(d, s, rule);
        CHECK(out.xi[1] == doctest::Approx(rule.a / 2.0 * 2.0 * 0.4));
        CHECK(out.xi[0] == 0.0);
    }
    SUBCASE("a permanently violated constraint drives its multiplier to the cap") {
        s.min_rate[0] = {1.0, 1.0};
        rule.relative = 1.0;
        rule.cap = 1e4;
        for (int v = 1; v <= 5000; ++v) {
            rule.v = v;
            d = dual_update(d, s, rule);
            CHECK(d.nonnegative());
        }
        CHECK(d.zeta[0] == doctest::Approx(1e4));
    }
    SUBCASE("multipliers are projected onto the non-negative orthant") {
        d.xi = {0.01, 0.0};
        s.budget[0] = {-1.0, 1.0};
        CHECK(dual_update(d, s, rule).xi[0] == 0.0);
    }
}

TEST_CASE("single-link problem reaches the one-dimensional optimum") {
    for (double E : {0.0, 0.5, 2.0, 4.0}) {
        CAPTURE(E);
        NetworkConfig cfg = small_network(1, 1, 1);
        cfg.tol.inner_rel = 1e-8;
        cfg.tol.outer_rel = 1e-7;
        cfg.tol.max_sca_rounds = 200;
        ChannelState ch{Tensor3(1, 1, 1, 0.8), Tensor3(1, 1, 1, 0.05)};
        const double mask = cfg.p_mask[0], eta = cfg.rrhs[0].eta;
        auto value = [&](double p) { return std::log2(1.0 + p * 0.8 / 0.05) - E * eta * p; };
        const double best = golden_section(value, 0.0, mask);

        ScaleSolver solver;
        const PowerAllocation start = solver.initial_point(ch, cfg);
        const InnerResult r = solver.solve_fixed_E(ch, cfg, E, start);
        CHECK(r.alloc.p[0] == doctest::Approx(best).epsilon(1e-3).scale(mask));
        CHECK(r.stats.kkt_residual <= 1e-3 * mask);
        CHECK(segments_nondecreasing(r.stats));
    }
}

TEST_CASE("single-link problem whose optimum is switched off") {
    NetworkConfig cfg = small_network(1, 1, 1);
    ChannelState ch{Tensor3(1, 1, 1, 0.8), Tensor3(1, 1, 1, 0.05)};
    const double E = 6.0, eta = cfg.rrhs[0].eta;
    auto value = [&](double p) { return std::log2(1.0 + p * 0.8 / 0.05) - E * eta * p; };
    ScaleSolver solver;
    const InnerResult r = solver.solve_fixed_E(ch, cfg, E, solver.initial_point(ch, cfg));
    // Log-domain updates only approach zero geometrically, so compare objective values.
    CHECK(value(r.alloc.p[0]) >= value(0.0) - 0.02);
}

TEST_CASE("surrogate objective never decreases across rounds and outputs stay feasible") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        CAPTURE(seed);
        TinyInstance t = tiny_instance(seed);
        ScaleSolver solver;
        const PowerAllocation start = solver.initial_point(t.ch, t.cfg);
        const auto psi = streaming_min_rates(t.cfg);
        CHECK(check_feasibility(start, t.ch, t.cfg, psi).feasible());
        for (double E : {0.0, 1.0, 4.0}) {
            const InnerResult r = solver.solve_fixed_E(t.ch, t.cfg, E, start);
            CHECK(segments_nondecreasing(r.stats));
            CHECK(check_feasibility(r.alloc, t.ch, t.cfg, psi).feasible());
            for (auto v : r.alloc.p.values()) CHECK(v >= 0.0);
        }
        for (const auto& row : solver.trace()) CHECK(std::isfinite(row.surrogate));
    }
}

TEST_CASE("parallel power sweep inside the solver matches the serial one") {
    TinyInstance t = tiny_instance(9);
    ScaleOptions serial_opts, parallel_opts;
    parallel_opts.workers = 4;
    ScaleSolver serial(serial_opts), parallel(parallel_opts);
    const PowerAllocation start = serial.initial_point(t.ch, t.cfg);
    const InnerResult a = serial.solve_fixed_E(t.ch, t.cfg, 1.0, start);
    const InnerResult b = parallel.solve_fixed_E(t.ch, t.cfg, 1.0, start);
    CHECK(a.alloc.p == b.alloc.p);
}

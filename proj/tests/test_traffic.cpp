#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hcran/traffic.hpp"
#include "support.hpp"

using namespace hcran;

namespace {

// Direct form of the delay-constrained rate, evaluated in long double without the conjugate rewrite.
long double psi_hat_direct(long double lambda, long double t, long double bits) {
    const long double b = 2.0L + 2.0L * lambda * t;
    const long double disc = b * b - 8.0L * lambda * t;
    return 2.0L * lambda * bits / (b - std::sqrt(disc));
}

TrafficSpec spec(double lambda, double t, double bits) {
    TrafficSpec s;
    s.lambda = lambda;
    s.t_max = t;
    s.packet_bits = bits;
    return s;
}

}  // namespace

TEST_CASE("delay bound from queue length") {
    CHECK(max_delay_from_queue(25.0, 125.0) == doctest::Approx(0.2));
    CHECK(max_delay_from_queue(0.0, 125.0) == 0.0);
    CHECK(max_delay_from_queue(125.0, 125.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(max_delay_from_queue(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(max_delay_from_queue(1.0, -3.0), std::invalid_argument);
}

TEST_CASE("baseline streaming rate requirement") {
    const double independent = static_cast<double>(psi_hat_direct(125.0L, 0.2L, 1024.0L) / 31250.0L);
    CHECK(independent == doctest::Approx(4.18).epsilon(0.01 / 4.18));
    const double psi = min_rate_psi(TrafficSpec::from_queue(25.0, 125.0, 1024.0), 31250.0);
    CHECK(psi == doctest::Approx(independent).epsilon(1e-12));
    CHECK(std::abs(psi - 4.18) <= 0.01);
}

TEST_CASE("rate requirement matches the direct formula over a wide load range") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> log_lambda(std::log(1e-3), std::log(1e4));
    std::uniform_real_distribution<double> log_t(std::log(1e-3), std::log(10.0));
    for (int trial = 0; trial < 2000; ++trial) {
        const double lambda = std::exp(log_lambda(rng)), t = std::exp(log_t(rng));
        if (lambda * t > 1e5) continue;  // the long double reference itself cancels badly beyond this
        const long double want = psi_hat_direct(lambda, t, 1000.0L);
        const double got = min_rate_psi(spec(lambda, t, 1000.0), 1.0);
        CHECK(std::abs((static_cast<long double>(got) - want) / want) < 1e-10L);
    }
}

TEST_CASE("rate requirement at a very light load") {
    const long double want = psi_hat_direct(1e-3L, 0.2L, 1024.0L);
    CHECK(min_rate_psi(spec(1e-3, 0.2, 1024.0), 1.0) == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
}

TEST_CASE("rate requirement is linear in packet size") {
    const double one = min_rate_psi(spec(125.0, 0.2, 1024.0), 31250.0);
    const double two = min_rate_psi(spec(125.0, 0.2, 2048.0), 31250.0);
    CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-15));
}

TEST_CASE("rate requirement grows with load and shrinks with the delay budget") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.1, 500.0), tt(0.01, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double lambda = u(rng), t = tt(rng);
        const double base = min_rate_psi(spec(lambda, t, 1024.0), 1e4);
        CHECK(min_rate_psi(spec(lambda * 1.01, t, 1024.0), 1e4) > base);
        CHECK(min_rate_psi(spec(lambda, t * 1.01, 1024.0), 1e4) < base);
    }
}

TEST_CASE("delay roots") {
    SUBCASE("baseline load") {
        const auto [x1, x2] = delay_roots(125.0, 0.2);
        CHECK(x1 == doctest::Approx((52.0 - std::sqrt(2504.0)) / 250.0).epsilon(1e-12));
        CHECK(x1 == doctest::Approx(0.007840).epsilon(1e-3));
        CHECK(x1 < x2);
        CHECK(125.0 * x1 * x1 - 52.0 * x1 + 0.4 == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("unit load has two positive roots") {
        const auto [x1, x2] = delay_roots(1.0, 1.0);
        CHECK(x1 > 0.0);
        CHECK(x2 > x1);
        CHECK(x1 == doctest::Approx(2.0 - std::sqrt(2.0)));
    }
    SUBCASE("smaller root never exceeds the delay target") {
        std::mt19937_64 rng(47);
        std::uniform_real_distribution<double> u(0.01, 1000.0), tt(1e-3, 5.0);
        for (int trial = 0; trial < 1000; ++trial) {
            const double lambda = u(rng), t = tt(rng);
            const auto [x1, x2] = delay_roots(lambda, t);
            CHECK(x1 > 0.0);
            CHECK(x1 <= t);
            const double residual = lambda * x1 * x1 - (2.0 + 2.0 * lambda * t) * x1 + 2.0 * t;
            CHECK(std::abs(residual) <= 1e-12 * (2.0 * t + (2.0 + 2.0 * lambda * t) * x1));
        }
    }
}

TEST_CASE("delay validation") {
    NetworkConfig cfg = hcran::testing::small_network(1, 1, 1, {true});
    ChannelState ch{Tensor3(1, 1, 1, 2.0), Tensor3(1, 1, 1, 1e-3)};
    const double psi = streaming_min_rates(cfg)[0];
    REQUIRE(psi > 0.0);

    PowerAllocation a{Tensor3(1, 1, 1)};
    auto checks = validate_delay(a, ch, cfg);
    REQUIRE(checks.size() == 1);
    CHECK_FALSE(checks[0].pass);

    a.p(0, 0, 0) = (std::exp2(psi) - 1.0) * 1e-3 / 2.0;
    checks = validate_delay(a, ch, cfg);
    CHECK(checks[0].rate == doctest::Approx(psi).epsilon(1e-12));
    CHECK(checks[0].pass);
}

TEST_CASE("elastic users have no rate requirement") {
    NetworkConfig cfg = hcran::testing::small_network(1, 3, 1, {false, true, false});
    const auto psi = streaming_min_rates(cfg);
    CHECK(psi[0] == 0.0);
    CHECK(psi[1] > 0.0);
    CHECK(psi[2] == 0.0);
}

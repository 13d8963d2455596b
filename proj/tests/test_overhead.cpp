#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include "hcran/overhead.hpp"

using namespace hcran;

namespace {

OverheadInput dims(std::uint64_t M, std::uint64_t K, std::uint64_t N, std::uint64_t streaming = 0) {
    OverheadInput in;
    in.rrhs = M;
    in.users = K;
    in.subcarriers = N;
    in.streaming_users = streaming;
    return in;
}

const OverheadItem& item(const std::vector<OverheadItem>& rows, const std::string& name) {
    const auto it = std::find_if(rows.begin(), rows.end(), [&](const OverheadItem& r) { return r.name == name; });
    REQUIRE(it != rows.end());
    return *it;
}

}  // namespace

TEST_CASE("binomial coefficients") {
    CHECK(binomial(4, 2) == 6);
    CHECK(binomial(40, 4) == 91390);
    CHECK(binomial(3, 4) == 0);
    CHECK(binomial(7, 0) == 1);
}

TEST_CASE("channel feedback for three RRHs, four users and eight subcarriers") {
    const auto rows = overhead_items(dims(3, 4, 8));
    const OverheadItem& h = item(rows, "h");
    CHECK(h.items * h.bits_per_item == 288);
    CHECK(h.centralized_only);
    CHECK_FALSE(item(rows, "p").centralized_only);
}

TEST_CASE("zero rounds exchange nothing") {
    CHECK(count_distributed(dims(3, 12, 8, 4), 0) == 0);
}

TEST_CASE("distributed bits scale with rounds") {
    const OverheadInput in = dims(3, 12, 8, 4);
    CHECK(count_distributed(in, 5) == 5 * count_distributed(in, 1));
}

TEST_CASE("a single RRH has no cross-RRH terms") {
    const auto rows = overhead_items(dims(1, 6, 4, 2));
    CHECK(item(rows, "theta").items == 0);
    CHECK(item(rows, "elastic cross-RRH price").items == 0);
    CHECK(item(rows, "cross-RRH interference (elastic, weak)").items == 0);
    CHECK(count_centralized(dims(1, 6, 4, 2)) > count_distributed(dims(1, 6, 4, 2), 1));
}

TEST_CASE("counts grow with every dimension") {
    const OverheadInput base = dims(2, 6, 4, 2);
    auto grown = base;
    for (int d = 0; d < 3; ++d) {
        grown = base;
        if (d == 0) ++grown.rrhs;
        if (d == 1) ++grown.users;
        if (d == 2) ++grown.subcarriers;
        CHECK(count_centralized(grown) > count_centralized(base));
        CHECK(count_distributed(grown, 1) > count_distributed(base, 1));
    }
}

TEST_CASE("centralised exchange exceeds one distributed round for every swept user count") {
    for (std::uint64_t K = 4; K <= 40; ++K) {
        CAPTURE(K);
        const OverheadInput in = dims(3, K, 8, K / 2);
        CHECK(count_centralized(in) > count_distributed(in, 1));
    }
}

TEST_CASE("wider quantisation costs more bits") {
    QuantizationTable wide;
    wide.channel = 8;
    CHECK(count_centralized(dims(3, 4, 8), wide) == count_centralized(dims(3, 4, 8)) + 96 * 5);
    QuantizationTable bad;
    bad.multipliers = 0;
    CHECK_THROWS_AS(count_centralized(dims(3, 4, 8), bad), std::invalid_argument);
}

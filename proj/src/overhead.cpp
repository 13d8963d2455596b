#include "hcran/overhead.hpp"

#include <algorithm>
#include <stdexcept>

namespace hcran {

void QuantizationTable::validate() const {
    if (multipliers < 1 || allocation < 1 || channel < 1 || aggregates < 1)
        throw std::invalid_argument("quantization: every class needs at least one bit");
}

OverheadInput OverheadInput::from(const NetworkConfig& cfg) {
    OverheadInput in;
    in.rrhs = cfg.num_rrhs();
    in.users = cfg.num_users();
    in.subcarriers = cfg.n_subcarriers;
    in.streaming_users = 0;
    for (std::size_t k = 0; k < cfg.num_users(); ++k) in.streaming_users += cfg.streaming(k) ? 1 : 0;
    in.users_per_subcarrier = cfg.l_max;
    return in;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::vector<OverheadItem> overhead_items(const OverheadInput& in, const QuantizationTable& q) {
    q.validate();
    const std::uint64_t M = in.rrhs, K = in.users, N = in.subcarriers;
    const std::uint64_t links = M * K * N;
    const std::uint64_t other_rrhs = M > 0 ? M - 1 : 0;
    const std::uint64_t multi_rrh = M > 1 ? 1 : 0;

    std::vector<OverheadItem> rows;
    auto add = [&](std::string name, std::uint64_t items, bool central_only, unsigned bits) {
        rows.push_back({std::move(name), items, central_only, bits});
    };

    // State that every RRH must learn in either mode.
    add("p", links, false, q.allocation);
    add("rho", links, false, q.allocation);
    add("A", M * K, false, q.allocation);
    add("zeta'", in.streaming_users, false, q.multipliers);
    // One multiplier per user, unordered RRH pair and ordered subcarrier pair.
    add("theta", M * other_rrhs / 2 * K * N * N, false, q.multipliers);
    // One multiplier per (RRH, subcarrier) and every group of l+1 users.
    add("theta'", M * N * binomial(K, in.users_per_subcarrier + 1), false, q.multipliers);
    // One multiplier per (RRH, subcarrier) and unordered user pair.
    add("zeta~", M * N * binomial(K, 2), false, q.multipliers);

    // Channel state and interference-pricing sums that only the central unit needs.
    add("h", links, true, q.channel);
    // Sums over the other RRHs collapse to one item per receiving link.
    for (const char* name : {"streaming cross-RRH price", "streaming decoding-order price (a)",
                             "streaming decoding-order price (b)", "streaming decoding-order price (c)",
                             "elastic cross-RRH price", "selection price"})
        add(name, links * multi_rrh, true, q.aggregates);
    // Sums that keep an explicit interfering RRH index: one item per link and other RRH.
    for (const char* name : {"cross-RRH interference (streaming, strong)", "linearised cross term (strong)",
                             "linearised cross term (weak)", "cross-RRH interference (elastic, strong)",
                             "cross-RRH interference (elastic, weak)"})
        add(name, links * other_rrhs, true, q.aggregates);
    return rows;
}

std::uint64_t count_centralized(const OverheadInput& in, const QuantizationTable& q) {
    std::uint64_t bits = 0;
    for (const auto& r : overhead_items(in, q)) bits += r.items * r.bits_per_item;
    return bits;
}

std::uint64_t count_distributed(const OverheadInput& in, std::uint64_t rounds, const QuantizationTable& q) {
    std::uint64_t bits = 0;
    for (const auto& r : overhead_items(in, q))
        if (!r.centralized_only) bits += r.items * r.bits_per_item;
    return rounds * bits;
}

std::uint64_t count_centralized(const NetworkConfig& cfg, const QuantizationTable& q) {
    return count_centralized(OverheadInput::from(cfg), q);
}

std::uint64_t count_distributed(const NetworkConfig& cfg, std::uint64_t rounds, const QuantizationTable& q) {
    return count_distributed(OverheadInput::from(cfg), rounds, q);
}

}  // namespace hcran

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcran/model.hpp"

namespace hcran {

/// Bits per fed-back item for each variable class.
struct QuantizationTable {
    unsigned multipliers = 3;  // minimum-rate, selection, multiplexing and decoding-order multipliers
    unsigned allocation = 3;   // rho, p and A entries
    unsigned channel = 3;      // channel coefficients
    unsigned aggregates = 3;   // precomputed interference-pricing sums

    void validate() const;
};

/// Dimensions that the counts depend on.
struct OverheadInput {
    std::uint64_t rrhs = 1;
    std::uint64_t users = 1;
    std::uint64_t subcarriers = 1;
    std::uint64_t streaming_users = 0;
    std::uint64_t users_per_subcarrier = 3;

    static OverheadInput from(const NetworkConfig& cfg);
};

/// One counted row: how many items it contributes and whether only the centralised solver exchanges it.
struct OverheadItem {
    std::string name;
    std::uint64_t items = 0;
    bool centralized_only = false;
    unsigned bits_per_item = 3;
};

std::vector<OverheadItem> overhead_items(const OverheadInput& in, const QuantizationTable& q = {});

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Bits exchanged in one round when the BBU pool gathers channel state and prices centrally.
std::uint64_t count_centralized(const OverheadInput& in, const QuantizationTable& q = {});
/// Bits broadcast over `rounds` rounds when each RRH shares only its powers, binaries and multipliers.
std::uint64_t count_distributed(const OverheadInput& in, std::uint64_t rounds, const QuantizationTable& q = {});

std::uint64_t count_centralized(const NetworkConfig& cfg, const QuantizationTable& q = {});
std::uint64_t count_distributed(const NetworkConfig& cfg, std::uint64_t rounds, const QuantizationTable& q = {});

}  // namespace hcran

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "hcran/model.hpp"

namespace hcran {

/// Delay bound implied by an average queue length under arrival rate lambda.
double max_delay_from_queue(double q_len, double lambda);

/// Minimum spectral efficiency (bits/s/Hz) that keeps the M/G/1 delay within spec.t_max.
double min_rate_psi(const TrafficSpec& spec, double subcarrier_bw);

/// Both roots of lambda x^2 - (2 + 2 lambda T) x + 2T = 0, smaller first.
std::pair<double, double> delay_roots(double lambda, double t_max);

/// Per-user minimum rates; zero for elastic users.
std::vector<double> streaming_min_rates(const NetworkConfig& cfg);

struct DelayCheck {
    std::size_t user = 0;
    double rate = 0.0;
    double psi = 0.0;
    bool pass = false;
};

std::vector<DelayCheck> validate_delay(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg);

}  // namespace hcran

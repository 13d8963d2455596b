#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "hcran/model.hpp"

namespace hcran::testing {

/// Small hand-built network: RRH 0 is the high-power node, the rest are low-power nodes.
inline NetworkConfig small_network(std::size_t rrhs, std::size_t users, std::size_t subcarriers,
                                   std::vector<bool> streaming = {}) {
    NetworkConfig cfg;
    for (std::size_t m = 0; m < rrhs; ++m) {
        RrhSpec r;
        r.tier = m == 0 ? NodeTier::High : NodeTier::Low;
        r.p_max = m == 0 ? 1.0 : 0.25;
        r.eta = m == 0 ? 4.0 : 2.0;
        r.p_fiber = m == 0 ? 3.0 : 1.0;
        r.p_circuit = m == 0 ? 3.0 : 0.1;
        cfg.rrhs.push_back(r);
    }
    for (std::size_t k = 0; k < users; ++k) {
        UserSpec u;
        if (k < streaming.size() && streaming[k]) {
            u.kind = TrafficKind::Streaming;
            u.traffic = TrafficSpec::from_queue(25.0, 10.0, 1024.0);
        }
        cfg.users.push_back(u);
    }
    cfg.n_subcarriers = subcarriers;
    cfg.subcarrier_bw = 15e3;
    cfg.apply_defaults();
    return cfg;
}

inline ChannelState random_channel(const NetworkConfig& cfg, std::mt19937_64& rng, double noise = 1e-2) {
    std::exponential_distribution<double> chi(1.0);
    const std::size_t M = cfg.num_rrhs(), K = cfg.num_users(), N = cfg.n_subcarriers;
    ChannelState ch{Tensor3(M, K, N), Tensor3(M, K, N, noise)};
    for (auto& g : ch.gamma.values()) g = chi(rng);
    return ch;
}

inline Tensor3 random_powers(const NetworkConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor3 p(cfg.num_rrhs(), cfg.num_users(), cfg.n_subcarriers);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = u(rng) * cfg.p_mask[i];
    return p;
}

}  // namespace hcran::testing

#include "hcran/traffic.hpp"

#include <cmath>
#include <stdexcept>

namespace hcran {

double max_delay_from_queue(double q_len, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    return q_len / lambda;
}

double min_rate_psi(const TrafficSpec& spec, double subcarrier_bw) {
    if (!(spec.lambda > 0.0) || !(spec.t_max > 0.0) || !(spec.packet_bits > 0.0))
        throw std::invalid_argument("traffic spec needs positive lambda, t_max and packet_bits");
    if (!(subcarrier_bw > 0.0)) throw std::invalid_argument("subcarrier bandwidth must be positive");
    const double lt = spec.lambda * spec.t_max;
    const double b = 2.0 + 2.0 * lt;
    const double disc = b * b - 8.0 * lt;
    if (disc < 0.0) throw std::logic_error("negative delay discriminant");
    // b - sqrt(disc) rewritten through its conjugate to avoid cancellation when lambda*T is large.
    const double denom = 8.0 * lt / (b + std::sqrt(disc));
    const double psi_hat = 2.0 * spec.lambda * spec.packet_bits / denom;
    return psi_hat / subcarrier_bw;
}

std::pair<double, double> delay_roots(double lambda, double t_max) {
    if (!(lambda > 0.0) || !(t_max > 0.0)) throw std::invalid_argument("lambda and t_max must be positive");
    const double b = 2.0 + 2.0 * lambda * t_max;
    const double s = std::sqrt(b * b - 8.0 * lambda * t_max);
    const double big = (b + s) / (2.0 * lambda);
    // Product of the roots is 2T/lambda.
    const double small = (2.0 * t_max / lambda) / big;
    return {small, big};
}

std::vector<double> streaming_min_rates(const NetworkConfig& cfg) {
    std::vector<double> out(cfg.num_users(), 0.0);
    for (std::size_t k = 0; k < cfg.num_users(); ++k)
        if (cfg.users[k].traffic) out[k] = min_rate_psi(*cfg.users[k].traffic, cfg.subcarrier_bw);
    return out;
}

std::vector<DelayCheck> validate_delay(const PowerAllocation& alloc, const ChannelState& ch,
                                       const NetworkConfig& cfg) {
    std::vector<DelayCheck> out;
    const auto psi = streaming_min_rates(cfg);
    for (std::size_t k = 0; k < cfg.num_users(); ++k) {
        if (!cfg.streaming(k)) continue;
        DelayCheck c;
        c.user = k;
        c.psi = psi[k];
        c.rate = user_total_rate(alloc, ch, cfg, k);
        c.pass = c.rate >= c.psi - kRateAbsTol;
        out.push_back(c);
    }
    return out;
}

}  // namespace hcran

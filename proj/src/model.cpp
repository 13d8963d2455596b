#include "hcran/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hcran {

namespace {

void require_index(const Tensor3& t, std::size_t m, std::size_t k, std::size_t n) {
    if (m >= t.rrhs() || k >= t.users() || n >= t.subcarriers())
        throw std::invalid_argument("link index out of range");
}

std::string where3(std::size_t m, std::size_t k, std::size_t n) {
    std::ostringstream os;
    os << "(m=" << m << ",k=" << k << ",n=" << n << ")";
    return os.str();
}

}  // namespace

TrafficSpec TrafficSpec::from_queue(double q_len, double lambda, double packet_bits) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    TrafficSpec t;
    t.lambda = lambda;
    t.t_max = q_len / lambda;
    t.packet_bits = packet_bits;
    t.q_len = q_len;
    return t;
}

std::size_t NetworkConfig::low_tier_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(rrhs.begin(), rrhs.end(), [](const RrhSpec& r) { return r.tier == NodeTier::Low; }));
}

double NetworkConfig::static_power() const noexcept {
    double s = 0.0;
    for (const auto& r : rrhs) s += r.p_fiber + r.p_circuit;
    return s;
}

double NetworkConfig::max_mask() const noexcept {
    auto v = p_mask.values();
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

double NetworkConfig::min_p_max() const noexcept {
    double best = rrhs.empty() ? 0.0 : rrhs.front().p_max;
    for (const auto& r : rrhs) best = std::min(best, r.p_max);
    return best;
}

void NetworkConfig::apply_defaults() {
    const std::size_t M = rrhs.size(), K = users.size(), N = n_subcarriers;
    p_mask = Tensor3(M, K, N);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n) p_mask(m, k, n) = rrhs[m].p_max / static_cast<double>(N);
    weights.assign(M * K, 1.0);
    const double mm = max_mask();
    tol.selection_slack = 1e-6 * mm * mm;
    tol.multiplex_slack = 1e-6 * std::pow(mm, static_cast<double>(l_max + 1));
}

void NetworkConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& what) {
        throw std::invalid_argument(field + ": " + what);
    };
    if (rrhs.empty()) fail("rrhs", "at least one RRH is required");
    if (n_subcarriers == 0) fail("n_subcarriers", "must be positive");
    if (!(subcarrier_bw > 0.0)) fail("subcarrier_bw", "must be positive");
    if (l_max < 1) fail("l_max", "must be at least 1");
    for (std::size_t m = 0; m < rrhs.size(); ++m) {
        const auto& r = rrhs[m];
        const std::string tag = "rrhs[" + std::to_string(m) + "]";
        if (!(r.p_max > 0.0)) fail(tag + ".p_max", "must be positive");
        if (!(r.eta > 0.0)) fail(tag + ".eta", "must be positive");
        if (r.p_fiber < 0.0 || r.p_circuit < 0.0) fail(tag, "static powers must be non-negative");
    }
    for (std::size_t k = 0; k < users.size(); ++k) {
        const auto& u = users[k];
        const std::string tag = "users[" + std::to_string(k) + "]";
        if (u.streaming() != u.traffic.has_value())
            fail(tag + ".traffic", "streaming users need a traffic spec and elastic users must not carry one");
        if (u.traffic) {
            if (!(u.traffic->lambda > 0.0)) fail(tag + ".lambda", "must be positive");
            if (!(u.traffic->t_max > 0.0)) fail(tag + ".t_max", "must be positive");
            if (!(u.traffic->packet_bits > 0.0)) fail(tag + ".packet_bits", "must be positive");
        }
    }
    const std::size_t M = rrhs.size(), K = users.size(), N = n_subcarriers;
    if (p_mask.rrhs() != M || p_mask.users() != K || p_mask.subcarriers() != N)
        fail("p_mask", "shape does not match (rrhs, users, subcarriers)");
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n) {
                const double v = p_mask(m, k, n);
                if (!(v > 0.0)) fail("p_mask" + where3(m, k, n), "must be positive");
                if (v > rrhs[m].p_max) fail("p_mask" + where3(m, k, n), "exceeds p_max of its RRH");
            }
    if (weights.size() != M * K) fail("weights", "must hold one entry per (rrh, user)");
    for (double w : weights)
        if (w < 0.0 || w > 1.0) fail("weights", "entries must lie in [0, 1]");
    if (!(tol.selection_slack > 0.0)) fail("selection_slack", "must be positive");
    if (!(tol.multiplex_slack > 0.0)) fail("multiplex_slack", "must be positive");
    if (!(tol.xi > 0.0)) fail("xi", "must be positive");
    if (tol.max_sca_rounds < 1 || tol.max_inner_iters < 1) fail("iteration caps", "must be at least 1");
}

std::string to_string(ConstraintId c) {
    switch (c) {
        case ConstraintId::Mask: return "C4";
        case ConstraintId::Selection: return "C10";
        case ConstraintId::Multiplexing: return "C11";
        case ConstraintId::Budget: return "C12";
        case ConstraintId::MinRate: return "C13";
        case ConstraintId::Sic: return "C14";
    }
    return "?";
}

bool FeasibilityReport::has(ConstraintId c) const noexcept {
    return std::any_of(violations.begin(), violations.end(), [c](const Violation& v) { return v.constraint == c; });
}

double cross_interference(const Tensor3& p, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n) {
    double x = 0.0;
    for (std::size_t j = 0; j < p.rrhs(); ++j) {
        if (j == m) continue;
        double tx = 0.0;
        for (std::size_t i = 0; i < p.users(); ++i) tx += p(j, i, n);
        x += tx * ch.gamma(j, k, n);
    }
    return x;
}

double interference(const Tensor3& p, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n) {
    require_index(p, m, k, n);
    double same = 0.0;
    for (std::size_t i = 0; i < p.users(); ++i)
        if (i != k && stronger(ch, m, i, k, n)) same += p(m, i, n);
    return same * ch.gamma(m, k, n) + cross_interference(p, ch, m, k, n);
}

double sinr(const PowerAllocation& alloc, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n) {
    require_index(alloc.p, m, k, n);
    const double sig = alloc.p(m, k, n) * ch.gamma(m, k, n);
    if (sig <= 0.0) return 0.0;
    return sig / (ch.sigma(m, k, n) + interference(alloc.p, ch, m, k, n));
}

double user_rate(const PowerAllocation& alloc, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n) {
    return std::log2(1.0 + sinr(alloc, ch, m, k, n));
}

Tensor3 sinr_field(const Tensor3& p, const ChannelState& ch) {
    const std::size_t M = p.rrhs(), K = p.users(), N = p.subcarriers();
    Tensor3 out(M, K, N);
    std::vector<double> tx(M * N, 0.0);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t n = 0; n < N; ++n) tx[j * N + n] += p(j, i, n);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k) {
                const double pk = p(m, k, n);
                if (pk <= 0.0) continue;
                double same = 0.0;
                for (std::size_t i = 0; i < K; ++i)
                    if (i != k && stronger(ch, m, i, k, n)) same += p(m, i, n);
                double cross = 0.0;
                for (std::size_t j = 0; j < M; ++j)
                    if (j != m) cross += ch.gamma(j, k, n) * tx[j * N + n];
                const double g = ch.gamma(m, k, n);
                out(m, k, n) = pk * g / (ch.sigma(m, k, n) + same * g + cross);
            }
    return out;
}

double user_total_rate(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg,
                       std::size_t k) {
    double r = 0.0;
    for (std::size_t m = 0; m < cfg.num_rrhs(); ++m) {
        double rm = 0.0;
        for (std::size_t n = 0; n < cfg.n_subcarriers; ++n)
            if (alloc.p(m, k, n) > 0.0) rm += user_rate(alloc, ch, m, k, n);
        r += cfg.weight(m, k) * rm;
    }
    return r;
}

double weighted_sum_rate(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg) {
    const Tensor3 g = sinr_field(alloc.p, ch);
    double r = 0.0;
    for (std::size_t m = 0; m < cfg.num_rrhs(); ++m)
        for (std::size_t k = 0; k < cfg.num_users(); ++k) {
            if (cfg.streaming(k)) continue;
            double rk = 0.0;
            for (std::size_t n = 0; n < cfg.n_subcarriers; ++n) rk += std::log2(1.0 + g(m, k, n));
            r += cfg.weight(m, k) * rk;
        }
    return r;
}

double total_power(const PowerAllocation& alloc, const NetworkConfig& cfg) {
    double dynamic = 0.0;
    for (std::size_t m = 0; m < cfg.num_rrhs(); ++m) {
        double sm = 0.0;
        for (std::size_t k = 0; k < cfg.num_users(); ++k) {
            if (cfg.streaming(k)) continue;
            for (std::size_t n = 0; n < cfg.n_subcarriers; ++n) sm += alloc.p(m, k, n);
        }
        dynamic += cfg.rrhs[m].eta * sm;
    }
    return cfg.static_power() + dynamic;
}

EnergyReport energy_efficiency(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg) {
    EnergyReport rep;
    rep.sum_rate_R = weighted_sum_rate(alloc, ch, cfg);
    rep.total_power_P = total_power(alloc, cfg);
    rep.ee_E = rep.sum_rate_R / rep.total_power_P;
    return rep;
}

double sic_margin(const PowerAllocation& alloc, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t kw,
                  std::size_t n) {
    require_index(alloc.p, m, k, n);
    require_index(alloc.p, m, kw, n);
    if (k == kw) throw std::invalid_argument("sic_margin needs two distinct users");
    const double gk = ch.gamma(m, k, n), gw = ch.gamma(m, kw, n);
    if (gw > gk) throw std::invalid_argument("sic_margin expects the first user to have the stronger channel");
    const double xk = cross_interference(alloc.p, ch, m, k, n);
    const double xw = cross_interference(alloc.p, ch, m, kw, n);
    return gw * ch.sigma(m, k, n) - gk * ch.sigma(m, kw, n) + gw * xk - gk * xw;
}

FeasibilityReport check_feasibility(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg,
                                    std::span<const double> streaming_min_rates) {
    FeasibilityReport rep;
    const std::size_t M = cfg.num_rrhs(), K = cfg.num_users(), N = cfg.n_subcarriers;
    const Tensor3& p = alloc.p;
    auto add = [&](ConstraintId c, std::string where, double mag) {
        rep.violations.push_back({c, std::move(where), mag});
    };

    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n) {
                const double v = p(m, k, n);
                if (v < 0.0) add(ConstraintId::Mask, where3(m, k, n), -v);
                else if (v > cfg.p_mask(m, k, n)) add(ConstraintId::Mask, where3(m, k, n), v - cfg.p_mask(m, k, n));
            }

    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t m2 = m + 1; m2 < M; ++m2) {
                double a = 0.0, b = 0.0;
                for (std::size_t n = 0; n < N; ++n) {
                    a = std::max(a, p(m, k, n));
                    b = std::max(b, p(m2, k, n));
                }
                if (a * b > cfg.tol.selection_slack) {
                    std::ostringstream os;
                    os << "(k=" << k << ",m=" << m << ",m'=" << m2 << ")";
                    add(ConstraintId::Selection, os.str(), a * b - cfg.tol.selection_slack);
                }
            }

    std::vector<double> col(K);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t n = 0; n < N; ++n) {
            if (K <= cfg.l_max) break;
            for (std::size_t k = 0; k < K; ++k) col[k] = p(m, k, n);
            std::partial_sort(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(cfg.l_max + 1), col.end(),
                              std::greater<>());
            double prod = 1.0;
            for (std::size_t i = 0; i <= cfg.l_max; ++i) prod *= col[i];
            if (prod > cfg.tol.multiplex_slack) {
                std::ostringstream os;
                os << "(m=" << m << ",n=" << n << ")";
                add(ConstraintId::Multiplexing, os.str(), prod - cfg.tol.multiplex_slack);
            }
        }

    for (std::size_t m = 0; m < M; ++m) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n) s += p(m, k, n);
        const double cap = cfg.rrhs[m].p_max;
        if (s > cap * (1.0 + kBudgetRelTol)) add(ConstraintId::Budget, "(m=" + std::to_string(m) + ")", s - cap);
    }

    for (std::size_t k = 0; k < K && k < streaming_min_rates.size(); ++k) {
        const double psi = streaming_min_rates[k];
        if (psi <= 0.0) continue;
        const double r = user_total_rate(alloc, ch, cfg, k);
        if (r < psi - kRateAbsTol) add(ConstraintId::MinRate, "(k=" + std::to_string(k) + ")", psi - r);
    }

    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k) {
                if (p(m, k, n) <= 0.0) continue;
                for (std::size_t kw = 0; kw < K; ++kw) {
                    if (kw == k || p(m, kw, n) <= 0.0 || !stronger(ch, m, k, kw, n)) continue;
                    const double gk = ch.gamma(m, k, n), gw = ch.gamma(m, kw, n);
                    const double xk = cross_interference(p, ch, m, k, n);
                    const double xw = cross_interference(p, ch, m, kw, n);
                    const double omega = gw * ch.sigma(m, k, n) - gk * ch.sigma(m, kw, n) + gw * xk - gk * xw;
                    const double scale = gw * ch.sigma(m, k, n) + gk * ch.sigma(m, kw, n) + gw * xk + gk * xw;
                    const double prod = p(m, k, n) * p(m, kw, n);
                    if (prod * omega > kSicRelTol * prod * scale) {
                        std::ostringstream os;
                        os << "(m=" << m << ",n=" << n << ",k=" << k << ",k'=" << kw << ")";
                        add(ConstraintId::Sic, os.str(), prod * omega);
                    }
                }
            }
    return rep;
}

Binaries derive_binaries(const PowerAllocation& alloc, const NetworkConfig& cfg) {
    const std::size_t M = cfg.num_rrhs(), K = cfg.num_users(), N = cfg.n_subcarriers;
    const double eps = binarization_threshold(cfg);
    Binaries b;
    b.rho.assign(M * K * N, 0);
    b.a.assign(M * K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t best = M;
        double best_total = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            double t = 0.0;
            for (std::size_t n = 0; n < N; ++n) t += alloc.p(m, k, n);
            if (t > best_total) {
                best_total = t;
                best = m;
            }
        }
        if (best < M && best_total > eps) b.a[best * K + k] = 1;
    }
    std::vector<std::size_t> order(K);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t n = 0; n < N; ++n) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t x, std::size_t y) { return alloc.p(m, x, n) > alloc.p(m, y, n); });
            for (std::size_t r = 0; r < std::min(cfg.l_max, K); ++r) {
                const std::size_t k = order[r];
                if (alloc.p(m, k, n) > eps) b.rho[alloc.p.index(m, k, n)] = 1;
            }
        }
    return b;
}

double binarization_threshold(const NetworkConfig& cfg) { return 1e-6 * cfg.max_mask(); }

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace hcran

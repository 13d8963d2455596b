#include "hcran/scale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "hcran/parallel.hpp"
#include "hcran/traffic.hpp"

namespace hcran {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kDenominatorFloor = 1e-300;

double clip_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

ScaleCoefficients ScaleCoefficients::high_sir(std::size_t rrhs, std::size_t users, std::size_t subcarriers) {
    return {Tensor3(rrhs, users, subcarriers, 1.0), Tensor3(rrhs, users, subcarriers, 0.0)};
}

std::pair<double, double> scale_coeffs(double z0) {
    if (!(z0 > 0.0)) return {1.0, 0.0};
    if (std::isinf(z0)) return {1.0, 0.0};
    const double alpha = z0 / (1.0 + z0);
    const double beta = std::log2(1.0 + z0) - alpha * std::log2(z0);
    return {alpha, beta};
}

double approx_rate(const PowerAllocation& alloc, const ChannelState& ch, const ScaleCoefficients& coeffs,
                   std::size_t m, std::size_t k, std::size_t n) {
    const double z = sinr(alloc, ch, m, k, n);
    if (z <= 0.0) return -std::numeric_limits<double>::infinity();
    return coeffs.beta(m, k, n) + coeffs.alpha(m, k, n) * std::log2(z);
}

double DcLinearization::evaluate(const Tensor3& expansion, const Tensor3& p) const {
    double v = value;
    for (const auto& [i, g] : gradient) {
        const double slope = g * expansion[i];
        if (slope == 0.0) continue;
        if (!(p[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        v += slope * std::log(p[i] / expansion[i]);
    }
    return v;
}

DcLinearization dc_linearize(const PowerAllocation& prev, const ChannelState& ch, std::size_t m, std::size_t k,
                             std::size_t kw, std::size_t n) {
    const Tensor3& p = prev.p;
    const double gk = ch.gamma(m, k, n);
    const double xw = cross_interference(p, ch, m, kw, n);
    const double pk = p(m, k, n), pw = p(m, kw, n);
    DcLinearization out;
    out.value = gk * pk * pw * xw;
    out.gradient.emplace_back(p.index(m, k, n), gk * pw * xw);
    out.gradient.emplace_back(p.index(m, kw, n), gk * pk * xw);
    for (std::size_t j = 0; j < p.rrhs(); ++j) {
        if (j == m) continue;
        for (std::size_t i = 0; i < p.users(); ++i)
            out.gradient.emplace_back(p.index(j, i, n), gk * pk * pw * ch.gamma(j, kw, n));
    }
    return out;
}

double sic_convex_part(const Tensor3& p, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t kw,
                       std::size_t n) {
    const double gk = ch.gamma(m, k, n), gw = ch.gamma(m, kw, n);
    const double c = gw * ch.sigma(m, k, n) - gk * ch.sigma(m, kw, n);
    return p(m, k, n) * p(m, kw, n) * (c + gw * cross_interference(p, ch, m, k, n));
}

DualState DualState::zeros(std::size_t rrhs, std::size_t users) {
    DualState d;
    d.xi.assign(rrhs, 0.0);
    d.zeta.assign(users, 0.0);
    return d;
}

bool DualState::nonnegative() const {
    auto ok = [](double v) { return v >= 0.0; };
    if (!std::all_of(xi.begin(), xi.end(), ok) || !std::all_of(zeta.begin(), zeta.end(), ok)) return false;
    for (const auto& [key, v] : theta)
        if (v < 0.0) return false;
    for (const auto& [key, v] : theta_p)
        if (v < 0.0) return false;
    for (const auto& [key, v] : zeta_t)
        if (v < 0.0) return false;
    return true;
}

double StepRule::step(const Residual& r, double mu) const {
    return a / std::sqrt(static_cast<double>(std::max(v, 1))) * (r.scale + relative * mu);
}

namespace {

double advance(double mu, const Residual& r, const StepRule& rule) {
    const double next = mu + rule.step(r, mu) * r.violation;
    return std::clamp(next, 0.0, rule.cap * r.scale);
}

template <class Key>
std::map<Key, double> advance_sparse(const std::map<Key, double>& current, const std::map<Key, Residual>& slacks,
                                     const StepRule& rule) {
    std::map<Key, double> out;
    for (const auto& [key, r] : slacks) {
        auto it = current.find(key);
        const double mu = it == current.end() ? 0.0 : it->second;
        const double next = advance(mu, r, rule);
        if (next > 0.0) out.emplace(key, next);
    }
    // Multipliers whose constraint was not reported keep their value.
    for (const auto& [key, mu] : current)
        if (!slacks.contains(key)) out.emplace(key, mu);
    return out;
}

}  // namespace

DualState dual_update(const DualState& duals, const ConstraintSlacks& slacks, const StepRule& rule) {
    DualState out = duals;
    for (std::size_t m = 0; m < out.xi.size() && m < slacks.budget.size(); ++m)
        out.xi[m] = advance(out.xi[m], slacks.budget[m], rule);
    for (std::size_t k = 0; k < out.zeta.size() && k < slacks.min_rate.size(); ++k)
        out.zeta[k] = advance(out.zeta[k], slacks.min_rate[k], rule);
    out.theta = advance_sparse(duals.theta, slacks.selection, rule);
    out.theta_p = advance_sparse(duals.theta_p, slacks.multiplex, rule);
    out.zeta_t = advance_sparse(duals.zeta_t, slacks.sic, rule);
    return out;
}

UpdateOutcome elastic_power_update(const ScaleDualTerms& t, double mask) {
    const double den = t.denominator();
    if (!(den > kDenominatorFloor)) return {mask, true};
    return {std::clamp(t.numerator() / den, 0.0, mask), false};
}

UpdateOutcome streaming_power_update(const ScaleDualTerms& t, double mask) {
    const double num = t.numerator();
    const double den = t.denominator();
    if (num <= 0.0) return {0.0, false};
    if (!(den > kDenominatorFloor)) return {mask, true};
    return {std::clamp(num / den, 0.0, mask), false};
}

SweepSnapshot::SweepSnapshot(const Inputs& in)
    : in_(in), M_(in.p->rrhs()), K_(in.p->users()), N_(in.p->subcarriers()) {
    const ChannelState& ch = *in.ch;
    const NetworkConfig& cfg = *in.cfg;
    const Tensor3& p = *in.p;
    const DualState& duals = *in.duals;
    const ScaleCoefficients& coeffs = *in.coeffs;
    const Tensor3& expansion = in.expansion ? *in.expansion : p;
    const std::size_t S = p.size();

    auto eff = [&](const Tensor3& t, std::size_t i) {
        if (!active(i)) return 0.0;
        return std::max(t[i], in.power_floor_rel * cfg.p_mask[i]);
    };

    std::vector<double> tx(M_ * N_, 0.0), tx0(M_ * N_, 0.0);
    for (std::size_t j = 0; j < M_; ++j)
        for (std::size_t i = 0; i < K_; ++i)
            for (std::size_t n = 0; n < N_; ++n) {
                tx[j * N_ + n] += eff(p, p.index(j, i, n));
                tx0[j * N_ + n] += eff(expansion, p.index(j, i, n));
            }
    auto cross = [&](const std::vector<double>& t, std::size_t m, std::size_t k, std::size_t n) {
        double x = 0.0;
        for (std::size_t j = 0; j < M_; ++j)
            if (j != m) x += ch.gamma(j, k, n) * t[j * N_ + n];
        return x;
    };

    sinr_.assign(S, 0.0);
    phi_.assign(S, 0.0);
    same_.assign(S, 0.0);
    cross_mn_.assign(M_ * N_, 0.0);
    selection_.assign(S, 0.0);
    multiplex_.assign(S, 0.0);
    sic_den_.assign(S, 0.0);
    sic_num_.assign(S, 0.0);

    const auto cells = static_cast<std::ptrdiff_t>(M_ * N_);
    const int threads = std::max(in.workers, 1);
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
    for (std::ptrdiff_t cell = 0; cell < cells; ++cell) {
        const std::size_t m = static_cast<std::size_t>(cell) / N_, n = static_cast<std::size_t>(cell) % N_;
            for (std::size_t k = 0; k < K_; ++k) {
                const std::size_t a = p.index(m, k, n);
                if (!active(a)) continue;
                double stronger_tx = 0.0;
                for (std::size_t i = 0; i < K_; ++i)
                    if (i != k && stronger(ch, m, i, k, n)) stronger_tx += eff(p, p.index(m, i, n));
                const double g = ch.gamma(m, k, n);
                const double d = ch.sigma[a] + g * stronger_tx + cross(tx, m, k, n);
                sinr_[a] = eff(p, a) * g / d;
                const double mult = cfg.streaming(k) ? duals.zeta[k] : 1.0;
                phi_[a] = mult * cfg.weight(m, k) * coeffs.alpha[a] / kLn2 / d;
            }
    }

    std::vector<double> phi_tot(K_ * N_, 0.0);
    for (std::size_t m = 0; m < M_; ++m)
        for (std::size_t l = 0; l < K_; ++l)
            for (std::size_t n = 0; n < N_; ++n) phi_tot[l * N_ + n] += phi_[p.index(m, l, n)];

#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
    for (std::ptrdiff_t cell = 0; cell < cells; ++cell) {
        const std::size_t m = static_cast<std::size_t>(cell) / N_, n = static_cast<std::size_t>(cell) % N_;
        {
            double c = 0.0;
            for (std::size_t l = 0; l < K_; ++l)
                c += ch.gamma(m, l, n) * (phi_tot[l * N_ + n] - phi_[p.index(m, l, n)]);
            cross_mn_[m * N_ + n] = c;
            for (std::size_t k = 0; k < K_; ++k) {
                const std::size_t a = p.index(m, k, n);
                if (!active(a)) continue;
                double s = 0.0;
                for (std::size_t l = 0; l < K_; ++l)
                    if (l != k && stronger(ch, m, k, l, n)) s += phi_[p.index(m, l, n)] * ch.gamma(m, l, n);
                same_[a] = s;
            }
        }
    }

    for (const auto& [key, mu] : duals.theta) {
        const std::size_t a = p.index(key.rrh_a, key.user, key.sub_a);
        const std::size_t b = p.index(key.rrh_b, key.user, key.sub_b);
        if (!active(a) || !active(b)) continue;
        selection_[a] += mu * eff(p, b);
        selection_[b] += mu * eff(p, a);
    }

    for (const auto& [key, mu] : duals.theta_p) {
        for (std::uint8_t x = 0; x < key.count; ++x) {
            const std::size_t a = p.index(key.rrh, key.members[x], key.sub);
            if (!active(a)) continue;
            double others = 1.0;
            for (std::uint8_t y = 0; y < key.count; ++y)
                if (y != x) others *= eff(p, p.index(key.rrh, key.members[y], key.sub));
            multiplex_[a] += mu * others;
        }
    }

    auto scatter = [&](std::size_t a, double d) {
        if (!active(a)) return;
        if (d > 0.0) sic_den_[a] += d;
        else sic_num_[a] -= d * eff(p, a);
    };
    for (const auto& [key, mu] : duals.zeta_t) {
        const std::size_t m = key.rrh, n = key.sub, k = key.strong, kw = key.weak;
        const std::size_t ak = p.index(m, k, n), aw = p.index(m, kw, n);
        if (!active(ak) || !active(aw)) continue;
        const double gk = ch.gamma(m, k, n), gw = ch.gamma(m, kw, n);
        const double c = gw * ch.sigma[ak] - gk * ch.sigma[aw];
        const double xk = cross(tx, m, k, n);
        const double xw0 = cross(tx0, m, kw, n);
        const double pk = eff(p, ak), pw = eff(p, aw);
        const double pk0 = eff(expansion, ak), pw0 = eff(expansion, aw);
        const double lin = c + gw * xk;
        scatter(ak, mu * (pw * lin - gk * pw0 * xw0));
        scatter(aw, mu * (pk * lin - gk * pk0 * xw0));
        for (std::size_t j = 0; j < M_; ++j) {
            if (j == m) continue;
            const double d = pk * pw * gw * ch.gamma(j, k, n) - gk * pk0 * pw0 * ch.gamma(j, kw, n);
            for (std::size_t i = 0; i < K_; ++i) scatter(p.index(j, i, n), mu * d);
        }
    }
}

ScaleDualTerms SweepSnapshot::terms(std::size_t m, std::size_t k, std::size_t n) const {
    const NetworkConfig& cfg = *in_.cfg;
    const std::size_t a = in_.p->index(m, k, n);
    ScaleDualTerms t;
    const double mult = cfg.streaming(k) ? in_.duals->zeta[k] : 1.0;
    t.rate_weight = mult * cfg.weight(m, k) * in_.coeffs->alpha[a] / kLn2;
    t.power_cost = cfg.streaming(k) ? 0.0 : in_.E * cfg.rrhs[m].eta;
    t.budget = in_.duals->xi[m];
    t.same_rrh = same_[a];
    t.cross_rrh = cross_mn_[m * N_ + n];
    t.selection = selection_[a];
    t.multiplexing = multiplex_[a];
    t.sic_denominator = sic_den_[a];
    t.sic_numerator = sic_num_[a];
    return t;
}

UpdateOutcome SweepSnapshot::update(std::size_t m, std::size_t k, std::size_t n) const {
    const std::size_t a = in_.p->index(m, k, n);
    if (!active(a)) return {0.0, false};
    const double mask = in_.cfg->p_mask[a];
    const ScaleDualTerms t = terms(m, k, n);
    UpdateOutcome u = in_.cfg->streaming(k) ? streaming_power_update(t, mask) : elastic_power_update(t, mask);
    u.power = std::max(u.power, in_.power_floor_rel * mask);
    return u;
}

double surrogate_objective(const Tensor3& p, const ChannelState& ch, const NetworkConfig& cfg,
                           const ScaleCoefficients& coeffs, double E, double power_floor_rel) {
    (void)power_floor_rel;
    const Tensor3 g = sinr_field(p, ch);
    double r = 0.0;
    for (std::size_t m = 0; m < cfg.num_rrhs(); ++m)
        for (std::size_t k = 0; k < cfg.num_users(); ++k) {
            if (cfg.streaming(k)) continue;
            double rk = 0.0;
            for (std::size_t n = 0; n < cfg.n_subcarriers; ++n) {
                const std::size_t a = p.index(m, k, n);
                if (g[a] > 0.0) rk += coeffs.beta[a] + coeffs.alpha[a] * std::log2(g[a]);
            }
            r += cfg.weight(m, k) * rk;
        }
    return r - E * total_power(PowerAllocation{p}, cfg);
}

namespace {

/// One fixed-E solve: shared state for both the relaxed and the support-restricted phases.
class ScaleRun {
public:
    ScaleRun(const ChannelState& ch, const NetworkConfig& cfg, double E, const ScaleOptions& opts,
             std::vector<ScaleTraceRow>* trace)
        : ch_(ch), cfg_(cfg), E_(E), opts_(opts), trace_(trace),
          M_(cfg.num_rrhs()), K_(cfg.num_users()), N_(cfg.n_subcarriers), S_(M_ * K_ * N_),
          psi_(streaming_min_rates(cfg)) {
        varpi1_ = cfg.tol.inner_rel * cfg.min_p_max();
        varpi2_ = cfg.tol.outer_rel * cfg.min_p_max();
        eps_bin_ = binarization_threshold(cfg);
    }

    double floor_at(std::size_t a) const { return opts_.power_floor_rel * cfg_.p_mask[a]; }

    double user_rate(const Tensor3& p, std::size_t k) const {
        double r = 0.0;
        PowerAllocation view{p};
        for (std::size_t m = 0; m < M_; ++m) {
            double rm = 0.0;
            for (std::size_t n = 0; n < N_; ++n)
                if (p(m, k, n) > 0.0) rm += hcran::user_rate(view, ch_, m, k, n);
            r += cfg_.weight(m, k) * rm;
        }
        return r;
    }

    double rate_target(std::size_t k) const { return psi_[k] * (1.0 + 1e-9) + kRateAbsTol * 0.5; }

    bool rates_met(const Tensor3& p) const {
        for (std::size_t k = 0; k < K_; ++k)
            if (psi_[k] > 0.0 && user_rate(p, k) < psi_[k] - kRateAbsTol * 0.5) return false;
        return true;
    }

    bool budget_met(const Tensor3& p) const {
        for (std::size_t m = 0; m < M_; ++m) {
            double s = 0.0;
            for (std::size_t k = 0; k < K_; ++k)
                for (std::size_t n = 0; n < N_; ++n) s += p(m, k, n);
            if (s > cfg_.rrhs[m].p_max * (1.0 + kBudgetRelTol * 0.5)) return false;
        }
        return true;
    }

    /// Raises streaming user k's powers by a common factor until its rate target holds.
    bool boost_user(Tensor3& p, std::size_t k) const {
        std::vector<std::size_t> links;
        double log_hi = 0.0;
        for (std::size_t m = 0; m < M_; ++m)
            for (std::size_t n = 0; n < N_; ++n) {
                const std::size_t a = p.index(m, k, n);
                if (p[a] <= 0.0) continue;
                links.push_back(a);
                log_hi = std::max(log_hi, std::log(cfg_.p_mask[a] / p[a]));
            }
        if (links.empty()) return false;
        const std::vector<double> base = [&] {
            std::vector<double> b;
            for (auto a : links) b.push_back(p[a]);
            return b;
        }();
        auto apply = [&](double log_t) {
            const double t = std::exp(log_t);
            for (std::size_t i = 0; i < links.size(); ++i)
                p[links[i]] = std::min(cfg_.p_mask[links[i]], base[i] * t);
        };
        const double target = rate_target(k);
        apply(log_hi);
        if (user_rate(p, k) < target) return false;
        double lo = 0.0, hi = log_hi;
        for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
            const double mid = 0.5 * (lo + hi);
            apply(mid);
            if (user_rate(p, k) >= target) hi = mid;
            else lo = mid;
        }
        apply(hi);
        return true;
    }

    /// Restores the power budgets and the streaming rate targets; false when that is impossible.
    bool make_feasible(Tensor3& p) const {
        for (int pass = 0; pass < 12; ++pass) {
            bool changed = false;
            for (std::size_t m = 0; m < M_; ++m) {
                double s = 0.0;
                for (std::size_t k = 0; k < K_; ++k)
                    for (std::size_t n = 0; n < N_; ++n) s += p(m, k, n);
                const double cap = cfg_.rrhs[m].p_max;
                if (s > cap) {
                    const double f = cap / s * (1.0 - 1e-9);
                    for (std::size_t k = 0; k < K_; ++k)
                        for (std::size_t n = 0; n < N_; ++n) p(m, k, n) *= f;
                    changed = true;
                }
            }
            for (std::size_t k = 0; k < K_; ++k) {
                if (psi_[k] <= 0.0 || user_rate(p, k) >= psi_[k] - kRateAbsTol * 0.5) continue;
                if (!boost_user(p, k)) return false;
                changed = true;
            }
            if (!changed) return true;
        }
        return budget_met(p) && rates_met(p);
    }

    ScaleCoefficients refresh(const Tensor3& p) const {
        ScaleCoefficients c = ScaleCoefficients::high_sir(M_, K_, N_);
        const Tensor3 g = sinr_field(p, ch_);
        for (std::size_t a = 0; a < S_; ++a) {
            if (g[a] <= 0.0) continue;
            const auto [al, be] = scale_coeffs(g[a]);
            c.alpha[a] = al;
            c.beta[a] = be;
        }
        return c;
    }

    double norm_diff(const Tensor3& a, const Tensor3& b) const {
        double s = 0.0;
        for (std::size_t i = 0; i < S_; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    }

    ConstraintSlacks slacks(const Tensor3& q, const std::vector<std::uint8_t>& active, const ScaleCoefficients& coeffs,
                            const Tensor3& expansion, const DualState& duals) const {
        ConstraintSlacks out;
        out.budget.resize(M_);
        for (std::size_t m = 0; m < M_; ++m) {
            double s = 0.0;
            std::size_t count = 0;
            for (std::size_t k = 0; k < K_; ++k)
                for (std::size_t n = 0; n < N_; ++n) {
                    s += q(m, k, n);
                    count += active[q.index(m, k, n)] ? 1 : 0;
                }
            const double cap = cfg_.rrhs[m].p_max;
            out.budget[m] = {clip_unit((s - cap) / cap), static_cast<double>(std::max<std::size_t>(count, 1)) /
                                                             (std::numbers::ln2 * cap)};
        }

        const Tensor3 g = sinr_field(q, ch_);
        out.min_rate.resize(K_);
        for (std::size_t k = 0; k < K_; ++k) {
            if (psi_[k] <= 0.0) continue;
            double r = 0.0;
            for (std::size_t m = 0; m < M_; ++m) {
                double rm = 0.0;
                for (std::size_t n = 0; n < N_; ++n) {
                    const std::size_t a = q.index(m, k, n);
                    if (g[a] > 0.0) rm += std::max(0.0, coeffs.beta[a] + coeffs.alpha[a] * std::log2(g[a]));
                }
                r += cfg_.weight(m, k) * rm;
            }
            out.min_rate[k] = {clip_unit((psi_[k] - r) / psi_[k]), 1.0};
        }

        const double rho1 = cfg_.tol.selection_slack;
        for (std::size_t k = 0; k < K_ && M_ > 1; ++k)
            for (std::size_t m = 0; m < M_; ++m)
                for (std::size_t m2 = m + 1; m2 < M_; ++m2)
                    for (std::size_t n = 0; n < N_; ++n) {
                        const std::size_t a = q.index(m, k, n);
                        if (q[a] <= 0.0) continue;
                        for (std::size_t n2 = 0; n2 < N_; ++n2) {
                            const std::size_t b = q.index(m2, k, n2);
                            const double prod = q[a] * q[b];
                            if (prod <= rho1) continue;
                            const SelectionKey key{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(m),
                                                   static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(m2),
                                                   static_cast<std::uint32_t>(n2)};
                            const double mm = cfg_.p_mask[a] * cfg_.p_mask[b];
                            out.selection[key] = {clip_unit((prod - rho1) / mm), 1.0 / (std::numbers::ln2 * mm)};
                        }
                    }
        // Products back under the slack still report, so their multipliers can decay.
        for (const auto& [key, mu] : duals.theta) {
            if (out.selection.contains(key)) continue;
            const std::size_t a = q.index(key.rrh_a, key.user, key.sub_a), b = q.index(key.rrh_b, key.user, key.sub_b);
            const double mm = cfg_.p_mask[a] * cfg_.p_mask[b];
            out.selection[key] = {clip_unit((q[a] * q[b] - rho1) / mm), 1.0 / (std::numbers::ln2 * mm)};
        }

        const std::size_t group = cfg_.l_max + 1;
        const double rho2 = cfg_.tol.multiplex_slack;
        if (group <= 8 && K_ >= group) {
            std::vector<std::size_t> order(K_);
            std::vector<std::uint16_t> pick;
            for (std::size_t m = 0; m < M_; ++m)
                for (std::size_t n = 0; n < N_; ++n) {
                    std::iota(order.begin(), order.end(), std::size_t{0});
                    std::sort(order.begin(), order.end(),
                              [&](std::size_t x, std::size_t y) { return q(m, x, n) > q(m, y, n); });
                    // Depth-first over descending powers; a branch stops once even the largest
                    // remaining powers cannot push the product above the slack.
                    auto rec = [&](auto&& self, std::size_t start, double prod) -> void {
                        if (pick.size() == group) {
                            if (prod <= rho2) return;
                            MultiplexKey key{static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(n), {}, 0};
                            std::vector<std::uint16_t> sorted = pick;
                            std::sort(sorted.begin(), sorted.end());
                            for (std::size_t i = 0; i < sorted.size(); ++i) key.members[i] = sorted[i];
                            key.count = static_cast<std::uint8_t>(sorted.size());
                            double mm = 1.0;
                            for (auto u : sorted) mm *= cfg_.p_mask(m, u, n);
                            out.multiplex[key] = {clip_unit((prod - rho2) / mm), 1.0 / (std::numbers::ln2 * mm)};
                            return;
                        }
                        for (std::size_t i = start; i + (group - pick.size()) <= K_; ++i) {
                            const double v = q(m, order[i], n);
                            if (prod * std::pow(v, static_cast<double>(group - pick.size())) <= rho2) break;
                            pick.push_back(static_cast<std::uint16_t>(order[i]));
                            self(self, i + 1, prod * v);
                            pick.pop_back();
                        }
                    };
                    rec(rec, 0, 1.0);
                }
            for (const auto& [key, mu] : duals.theta_p) {
                if (out.multiplex.contains(key)) continue;
                double prod = 1.0, mm = 1.0;
                for (std::uint8_t i = 0; i < key.count; ++i) {
                    prod *= q(key.rrh, key.members[i], key.sub);
                    mm *= cfg_.p_mask(key.rrh, key.members[i], key.sub);
                }
                out.multiplex[key] = {clip_unit((prod - rho2) / mm), 1.0 / (std::numbers::ln2 * mm)};
            }
        }

        if (M_ > 1) {
            std::vector<double> tx(M_ * N_, 0.0), tx0(M_ * N_, 0.0);
            for (std::size_t j = 0; j < M_; ++j)
                for (std::size_t i = 0; i < K_; ++i)
                    for (std::size_t n = 0; n < N_; ++n) {
                        tx[j * N_ + n] += q(j, i, n);
                        tx0[j * N_ + n] += expansion(j, i, n);
                    }
            auto cross = [&](const std::vector<double>& t, std::size_t m, std::size_t k, std::size_t n) {
                double x = 0.0;
                for (std::size_t j = 0; j < M_; ++j)
                    if (j != m) x += ch_.gamma(j, k, n) * t[j * N_ + n];
                return x;
            };
            for (std::size_t m = 0; m < M_; ++m)
                for (std::size_t n = 0; n < N_; ++n)
                    for (std::size_t k = 0; k < K_; ++k) {
                        const std::size_t ak = q.index(m, k, n);
                        if (!active[ak] || q[ak] <= eps_bin_) continue;
                        for (std::size_t kw = 0; kw < K_; ++kw) {
                            const std::size_t aw = q.index(m, kw, n);
                            if (kw == k || !active[aw] || q[aw] <= eps_bin_ || !stronger(ch_, m, k, kw, n)) continue;
                            const SicKey key{static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(n),
                                             static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(kw)};
                            const double gk = ch_.gamma(m, k, n), gw = ch_.gamma(m, kw, n);
                            const double c = gw * ch_.sigma[ak] - gk * ch_.sigma[aw];
                            const double xk = cross(tx, m, k, n), xw = cross(tx, m, kw, n);
                            const double xw0 = cross(tx0, m, kw, n);
                            const double pk0 = expansion[ak], pw0 = expansion[aw];
                            double dtx = 0.0;
                            for (std::size_t j = 0; j < M_; ++j)
                                if (j != m) dtx += ch_.gamma(j, kw, n) * (tx[j * N_ + n] - tx0[j * N_ + n]);
                            const double g_lin = gk * pk0 * pw0 * xw0 + gk * pw0 * xw0 * (q[ak] - pk0) +
                                                 gk * pk0 * xw0 * (q[aw] - pw0) + gk * pk0 * pw0 * dtx;
                            const double h = q[ak] * q[aw] * (c + gw * xk) - g_lin;
                            if (h <= 0.0 && !duals.zeta_t.contains(key)) continue;
                            const double scale = cfg_.p_mask[ak] * cfg_.p_mask[aw] *
                                                     (std::abs(c) + gw * xk + gk * xw) +
                                                 std::numeric_limits<double>::min();
                            out.sic[key] = {clip_unit(h / scale), 1.0 / (std::numbers::ln2 * scale)};
                        }
                    }
        }
        return out;
    }

    double max_violation(const ConstraintSlacks& s) const {
        double v = 0.0;
        for (const auto& r : s.budget) v = std::max(v, r.violation);
        for (const auto& r : s.min_rate) v = std::max(v, r.violation);
        for (const auto& [k, r] : s.selection) v = std::max(v, r.violation);
        for (const auto& [k, r] : s.multiplex) v = std::max(v, r.violation);
        for (const auto& [k, r] : s.sic) v = std::max(v, r.violation);
        return v;
    }

    /// Nested SCA rounds with the Jacobi power sweep and subgradient dual steps inside.
    void run_sca(int phase, Tensor3& p, const std::vector<std::uint8_t>& active, DualState& duals,
                 InnerStats& stats) {
        std::vector<std::size_t> targets;
        for (std::size_t a = 0; a < S_; ++a)
            if (active[a]) targets.push_back(a);
        const SweepPlan plan = SweepPlan::build(targets, S_, opts_.workers);

        StepRule rule;
        rule.a = opts_.step_a;
        rule.relative = 1.0;
        rule.cap = opts_.multiplier_cap;

        stats.trace_breaks.push_back(stats.surrogate_trace.size());
        int v_total = 0;
        ScaleCoefficients coeffs = refresh(p);
        Tensor3 expansion = p;
        const bool relaxed = phase == 1;
        const int max_rounds = relaxed && opts_.relaxed_rounds > 0 ? opts_.relaxed_rounds : cfg_.tol.max_sca_rounds;
        const int max_iters =
            relaxed && opts_.relaxed_inner_iters > 0 ? opts_.relaxed_inner_iters : cfg_.tol.max_inner_iters;
        for (int s = 1; s <= max_rounds; ++s) {
            coeffs = refresh(p);
            expansion = p;
            const double base = surrogate_objective(p, ch_, cfg_, coeffs, E_);
            Tensor3 q = p;
            Tensor3 q_new(M_, K_, N_);
            double last_violation = 0.0;
            double damping = 1.0;
            double prev_dq = HUGE_VAL;
            for (int v = 1; v <= max_iters; ++v) {
                SweepSnapshot::Inputs in{&ch_, &cfg_, E_, &q, &active, &coeffs, &duals, &expansion,
                                         opts_.power_floor_rel, opts_.workers};
                const SweepSnapshot snap(in);
                std::fill(q_new.values().begin(), q_new.values().end(), 0.0);
                bool flagged = false;
                parallel_sweep(plan, q_new.values(), [&](std::size_t task) {
                    const std::size_t a = targets[task];
                    const std::size_t m = a / (K_ * N_), k = (a / N_) % K_, n = a % N_;
                    const UpdateOutcome u = snap.update(m, k, n);
                    return u.power;
                });
                (void)flagged;
                if (damping < 1.0) {
                    Tensor3 mixed = q;
                    blend_log(mixed, q_new, damping);
                    q_new = std::move(mixed);
                }
                const ConstraintSlacks sl = slacks(q_new, active, coeffs, expansion, duals);
                last_violation = max_violation(sl);
                rule.v = ++v_total;
                duals = dual_update(duals, sl, rule);
                for (std::size_t k = 0; k < K_; ++k)
                    if (psi_[k] > 0.0 && duals.zeta[k] >= rule.cap && sl.min_rate[k].violation > 0.0)
                        stats.flagged = true;
                const double dq = norm_diff(q_new, q);
                std::swap(q, q_new);
                ++stats.sweeps;
                if (dq < varpi1_) break;
                // A growing step signals the simultaneous update is oscillating.
                if (dq > prev_dq) damping = std::max(damping * 0.5, 1.0 / 64.0);
                prev_dq = dq;
            }
            const Tensor3 raw = q;
            bool feasible = make_feasible(q);
            double cand = feasible ? surrogate_objective(q, ch_, cfg_, coeffs, E_) : -HUGE_VAL;
            for (int b = 1; b <= 6 && !(feasible && cand >= base); ++b) {
                q = p;
                blend_log(q, raw, std::ldexp(1.0, -b));
                feasible = make_feasible(q);
                cand = feasible ? surrogate_objective(q, ch_, cfg_, coeffs, E_) : -HUGE_VAL;
            }
            double step = 0.0;
            if (feasible && cand >= base) {
                step = norm_diff(q, p);
                p = q;
            }
            const double value = std::max(cand, base);
            stats.surrogate_trace.push_back(value);
            ++stats.rounds;
            if (trace_) trace_->push_back({phase, s, value, last_violation, step});
            if (step < varpi2_) break;
        }

        // Fixed-point residual of the closed-form update at the returned point.
        SweepSnapshot::Inputs in{&ch_, &cfg_, E_, &p, &active, &coeffs, &duals, &expansion, opts_.power_floor_rel,
                                 opts_.workers};
        const SweepSnapshot snap(in);
        Tensor3 again(M_, K_, N_);
        serial_sweep(plan, again.values(), [&](std::size_t task) {
            const std::size_t a = targets[task];
            return snap.update(a / (K_ * N_), (a / N_) % K_, a % N_).power;
        });
        stats.kkt_residual = norm_diff(again, p);
    }

    /// from <- from^(1-t) * to^t on entries where both are positive, `to` elsewhere when `from` is zero.
    static void blend_log(Tensor3& from, const Tensor3& to, double t) {
        for (std::size_t a = 0; a < from.size(); ++a) {
            if (from[a] > 0.0 && to[a] > 0.0)
                from[a] = std::exp((1.0 - t) * std::log(from[a]) + t * std::log(to[a]));
            else if (to[a] <= 0.0)
                from[a] = 0.0;
            else
                from[a] = t * to[a];
        }
    }

    /// Chooses one RRH per user and at most l_max users per (RRH, subcarrier) from a relaxed solution.
    std::vector<std::uint8_t> select_support(const Tensor3& p) const {
        const Tensor3 g = sinr_field(p, ch_);
        Tensor3 rate(M_, K_, N_);
        for (std::size_t a = 0; a < S_; ++a) rate[a] = std::log2(1.0 + g[a]);
        std::vector<std::size_t> home(K_, 0);
        for (std::size_t k = 0; k < K_; ++k) {
            double best = -1.0;
            for (std::size_t m = 0; m < M_; ++m) {
                double t = 0.0;
                for (std::size_t n = 0; n < N_; ++n) t += rate(m, k, n);
                t *= std::max(cfg_.weight(m, k), 1e-12);
                if (t > best) {
                    best = t;
                    home[k] = m;
                }
            }
        }
        std::vector<std::uint8_t> active(S_, 0);
        std::vector<std::size_t> load(M_ * N_, 0);
        for (std::size_t k = 0; k < K_; ++k) {
            if (psi_[k] <= 0.0) continue;
            const std::size_t m = home[k];
            std::size_t best_n = N_;
            double best = -1.0;
            for (std::size_t n = 0; n < N_; ++n)
                if (load[m * N_ + n] < cfg_.l_max && rate(m, k, n) > best) {
                    best = rate(m, k, n);
                    best_n = n;
                }
            if (best_n < N_) {
                active[rate.index(m, k, best_n)] = 1;
                ++load[m * N_ + best_n];
            }
        }
        std::vector<std::size_t> order;
        for (std::size_t m = 0; m < M_; ++m)
            for (std::size_t n = 0; n < N_; ++n) {
                order.clear();
                for (std::size_t k = 0; k < K_; ++k)
                    if (home[k] == m && !active[rate.index(m, k, n)] && rate(m, k, n) > 0.0) order.push_back(k);
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t x, std::size_t y) { return rate(m, x, n) > rate(m, y, n); });
                for (std::size_t k : order) {
                    if (load[m * N_ + n] >= cfg_.l_max) break;
                    active[rate.index(m, k, n)] = 1;
                    ++load[m * N_ + n];
                }
            }
        return active;
    }

    /// Switches off one link of every active pair whose decoding order is invalid. Returns true if any changed.
    bool prune_sic(Tensor3& p, std::vector<std::uint8_t>& active) const {
        bool changed = false;
        for (std::size_t m = 0; m < M_ && M_ > 1; ++m)
            for (std::size_t n = 0; n < N_; ++n)
                for (std::size_t k = 0; k < K_; ++k)
                    for (std::size_t kw = 0; kw < K_; ++kw) {
                        const std::size_t ak = p.index(m, k, n), aw = p.index(m, kw, n);
                        if (kw == k || p[ak] <= 0.0 || p[aw] <= 0.0 || !stronger(ch_, m, k, kw, n)) continue;
                        const double gk = ch_.gamma(m, k, n), gw = ch_.gamma(m, kw, n);
                        const double xk = cross_interference(p, ch_, m, k, n);
                        const double xw = cross_interference(p, ch_, m, kw, n);
                        const double omega = gw * ch_.sigma[ak] - gk * ch_.sigma[aw] + gw * xk - gk * xw;
                        const double scale = gw * ch_.sigma[ak] + gk * ch_.sigma[aw] + gw * xk + gk * xw;
                        if (omega <= kSicRelTol * 0.5 * scale) continue;
                        const bool drop_strong = cfg_.streaming(kw) && !cfg_.streaming(k);
                        const std::size_t drop = drop_strong ? ak : aw;
                        p[drop] = 0.0;
                        active[drop] = 0;
                        changed = true;
                    }
        return changed;
    }

    /// Gives every streaming user without an active link its best free subcarrier on its serving RRH.
    void reseat_streaming(Tensor3& p, std::vector<std::uint8_t>& active) const {
        for (std::size_t k = 0; k < K_; ++k) {
            if (psi_[k] <= 0.0) continue;
            bool any = false;
            std::size_t home = 0;
            double best_total = -1.0;
            for (std::size_t m = 0; m < M_; ++m) {
                double t = 0.0;
                for (std::size_t n = 0; n < N_; ++n) {
                    any = any || p(m, k, n) > 0.0;
                    t += ch_.gamma(m, k, n);
                }
                if (t > best_total) {
                    best_total = t;
                    home = m;
                }
            }
            if (any) continue;
            std::size_t best_n = N_;
            double best = -1.0;
            for (std::size_t n = 0; n < N_; ++n) {
                std::size_t load = 0;
                for (std::size_t i = 0; i < K_; ++i) load += p(home, i, n) > 0.0 ? 1 : 0;
                const double q = ch_.gamma(home, k, n) / (ch_.sigma(home, k, n) + cross_interference(p, ch_, home, k, n));
                if (load < cfg_.l_max && q > best) {
                    best = q;
                    best_n = n;
                }
            }
            if (best_n == N_) continue;
            const std::size_t a = p.index(home, k, best_n);
            active[a] = 1;
            p[a] = 1e-3 * cfg_.p_mask[a];
        }
    }

    /// Restricted-support refinement with decoding-order pruning; false if no feasible point was kept.
    bool refine(Tensor3& p, std::vector<std::uint8_t>& active, DualState& duals, InnerStats& stats) {
        for (std::size_t a = 0; a < S_; ++a)
            if (!active[a]) p[a] = 0.0;
            else p[a] = std::max(p[a], floor_at(a));
        duals.theta.clear();
        duals.theta_p.clear();
        duals.zeta_t.clear();
        for (int attempt = 0; attempt <= opts_.max_sic_prunes; ++attempt) {
            if (!make_feasible(p)) {
                reseat_streaming(p, active);
                if (!make_feasible(p)) return false;
            }
            if (attempt > 0 || !sic_clean(p)) {
                if (prune_sic(p, active)) {
                    reseat_streaming(p, active);
                    continue;
                }
            }
            run_sca(2, p, active, duals, stats);
            if (!sic_clean(p)) {
                prune_sic(p, active);
                reseat_streaming(p, active);
                continue;
            }
            cleanup(p, active);
            return budget_met(p) && rates_met(p) && sic_clean(p);
        }
        return false;
    }

    bool sic_clean(const Tensor3& p) const {
        Tensor3 copy = p;
        std::vector<std::uint8_t> dummy(S_, 1);
        return !prune_sic(copy, dummy);
    }

    /// Drops links that decayed below the binarisation threshold when that keeps every rate target.
    void cleanup(Tensor3& p, std::vector<std::uint8_t>& active) const {
        Tensor3 trial = p;
        std::vector<std::uint8_t> act = active;
        for (std::size_t a = 0; a < S_; ++a)
            if (trial[a] > 0.0 && trial[a] <= eps_bin_) {
                trial[a] = 0.0;
                act[a] = 0;
            }
        if (rates_met(trial) && sic_clean(trial)) {
            p = std::move(trial);
            active = std::move(act);
        }
    }

    /// Streaming users first, each on a subcarrier nobody else uses; elastic users fill what is left.
    PowerAllocation initial() {
        Tensor3 p(M_, K_, N_);
        std::vector<std::uint8_t> active(S_, 0);
        std::vector<std::size_t> home(K_, 0);
        for (std::size_t k = 0; k < K_; ++k) {
            double best = -1.0;
            for (std::size_t m = 0; m < M_; ++m) {
                double g = 0.0;
                for (std::size_t n = 0; n < N_; ++n) g += ch_.gamma(m, k, n) * cfg_.p_mask(m, k, n) / ch_.sigma(m, k, n);
                if (g > best) {
                    best = g;
                    home[k] = m;
                }
            }
        }
        std::vector<std::uint8_t> reserved(N_, 0);
        std::vector<std::size_t> load(M_ * N_, 0);
        auto claim = [&](std::size_t k) {
            const std::size_t m = home[k];
            std::size_t pick = N_;
            for (std::size_t n = 0; n < N_; ++n) {
                if (reserved[n] || active[p.index(m, k, n)]) continue;
                if (pick == N_ || ch_.gamma(m, k, n) > ch_.gamma(m, k, pick)) pick = n;
            }
            if (pick == N_) {
                for (std::size_t n = 0; n < N_; ++n) {
                    if (active[p.index(m, k, n)] || load[m * N_ + n] >= cfg_.l_max) continue;
                    if (pick == N_ || ch_.gamma(m, k, n) > ch_.gamma(m, k, pick)) pick = n;
                }
            }
            if (pick == N_) return false;
            reserved[pick] = 1;
            ++load[m * N_ + pick];
            const std::size_t a = p.index(m, k, pick);
            active[a] = 1;
            p[a] = 0.5 * cfg_.p_mask[a];
            return true;
        };
        for (std::size_t k = 0; k < K_; ++k)
            if (psi_[k] > 0.0) claim(k);

        std::vector<std::size_t> order;
        for (std::size_t m = 0; m < M_; ++m) {
            const double share = cfg_.rrhs[m].p_max / static_cast<double>(K_ * N_);
            for (std::size_t n = 0; n < N_; ++n) {
                if (reserved[n]) continue;
                order.clear();
                for (std::size_t k = 0; k < K_; ++k)
                    if (home[k] == m && psi_[k] <= 0.0) order.push_back(k);
                std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                    return ch_.gamma(m, x, n) > ch_.gamma(m, y, n);
                });
                for (std::size_t i = 0; i < order.size() && i < cfg_.l_max; ++i) {
                    const std::size_t a = p.index(m, order[i], n);
                    active[a] = 1;
                    p[a] = 0.5 * std::min(cfg_.p_mask[a], share);
                }
            }
        }

        for (int attempt = 0; attempt <= opts_.max_sic_prunes + static_cast<int>(N_); ++attempt) {
            if (!make_feasible(p)) {
                // Give every user still short of its target one more subcarrier, then retry.
                bool grew = false;
                for (std::size_t k = 0; k < K_; ++k)
                    if (psi_[k] > 0.0 && user_rate(p, k) < psi_[k] - kRateAbsTol * 0.5) grew = claim(k) || grew;
                if (!grew) break;
                continue;
            }
            if (!prune_sic(p, active)) {
                if (budget_met(p) && rates_met(p)) return PowerAllocation{p};
                break;
            }
            reseat_streaming(p, active);
        }
        throw ProblemInfeasible("no starting allocation meets the streaming rate targets");
    }

    InnerResult solve(const PowerAllocation& warm, bool reselect) {
        InnerResult res;
        DualState duals = DualState::zeros(M_, K_);
        Tensor3 p = warm.p;
        std::vector<std::uint8_t> active(S_, 1);
        const bool relaxation_exact = M_ == 1 && K_ <= cfg_.l_max;
        if (reselect && !relaxation_exact) {
            for (std::size_t a = 0; a < S_; ++a) p[a] = std::clamp(p[a], floor_at(a), cfg_.p_mask[a]);
            if (!make_feasible(p)) p = warm.p;
            run_sca(1, p, active, duals, res.stats);
            active = select_support(p);
        } else {
            for (std::size_t a = 0; a < S_; ++a) active[a] = warm.p[a] > 0.0 ? 1 : 0;
            if (relaxation_exact) std::fill(active.begin(), active.end(), 1);
        }
        Tensor3 refined = p;
        std::vector<std::uint8_t> act = active;
        DualState d2 = duals;
        if (refine(refined, act, d2, res.stats)) {
            res.alloc.p = std::move(refined);
            return res;
        }
        // Fall back to the warm start's support, which is known to admit a feasible point.
        Tensor3 fallback = warm.p;
        for (std::size_t a = 0; a < S_; ++a) act[a] = warm.p[a] > 0.0 ? 1 : 0;
        DualState d3 = DualState::zeros(M_, K_);
        if (refine(fallback, act, d3, res.stats)) {
            res.alloc.p = std::move(fallback);
            res.stats.note = "relaxed support infeasible; refined warm start";
            return res;
        }
        res.alloc = warm;
        res.stats.code = InnerCode::Infeasible;
        res.stats.note = "no feasible refinement found";
        return res;
    }

private:
    const ChannelState& ch_;
    const NetworkConfig& cfg_;
    double E_;
    const ScaleOptions& opts_;
    std::vector<ScaleTraceRow>* trace_;
    std::size_t M_, K_, N_, S_;
    std::vector<double> psi_;
    double varpi1_ = 0.0, varpi2_ = 0.0, eps_bin_ = 0.0;
};

}  // namespace

PowerAllocation ScaleSolver::initial_point(const ChannelState& ch, const NetworkConfig& cfg) {
    ScaleRun run(ch, cfg, 0.0, opts_, &trace_);
    first_call_ = true;
    return run.initial();
}

InnerResult ScaleSolver::solve_fixed_E(const ChannelState& ch, const NetworkConfig& cfg, double E,
                                       const PowerAllocation& warm_start) {
    ScaleRun run(ch, cfg, E, opts_, &trace_);
    const bool reselect = opts_.reselect_each_call || first_call_;
    first_call_ = false;
    return run.solve(warm_start, reselect);
}

}  // namespace hcran

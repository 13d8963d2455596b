#include "hcran/polyblock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "hcran/dinkelbach.hpp"
#include "hcran/scale.hpp"
#include "hcran/traffic.hpp"

namespace hcran {

namespace {

double log2_interference_plus(const Tensor3& p, const ChannelState& ch, std::size_t m, std::size_t k,
                              std::size_t n, bool with_signal) {
    double v = ch.sigma(m, k, n) + interference(p, ch, m, k, n);
    if (with_signal) v += p(m, k, n) * ch.gamma(m, k, n);
    return std::log2(v);
}

}  // namespace

CanonicalProblem::CanonicalProblem(const ChannelState& ch, const NetworkConfig& cfg, double E)
    : ch_(&ch), cfg_(&cfg), E_(E), psi_(streaming_min_rates(cfg)) {
    if (E < 0.0) throw std::invalid_argument("E must be non-negative");
    const std::size_t M = cfg.num_rrhs(), K = cfg.num_users(), N = cfg.n_subcarriers;
    for (std::size_t a = 0; a < M * K * N; ++a) {
        links_.push_back(a);
        power_ref_.push_back(kPowerRefFraction * cfg.p_mask[a]);
        upper_.push_back(std::log1p(cfg.p_mask[a] / power_ref_.back()));
    }
    for (std::size_t k = 0; k < K; ++k)
        if (cfg.streaming(k)) streaming_.push_back(k);

    const Tensor3 zero(M, K, N, 0.0);
    const Tensor3& top = cfg.p_mask;

    q_minus_top_ = q_minus(top);
    s1_ = upper_.size();
    upper_.push_back(std::max(0.0, q_minus_top_ - q_minus(zero)));

    if (!streaming_.empty()) {
        stream_minus_top_ = stream_minus(top);
        s2_ = upper_.size();
        upper_.push_back(std::max(0.0, stream_minus_top_ - stream_minus(zero)));
    }

    s3_ = upper_.size();
    if (M > 1) {
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t kw = 0; kw < K; ++kw) {
                        if (k == kw || !stronger(ch, m, k, kw, n)) continue;
                        SicPair s{m, n, k, kw, 0.0};
                        s.top = sic_plus(top, s);
                        if (s.top <= 0.0) continue;  // the decoding order holds for every power level
                        pairs_.push_back(s);
                        upper_.push_back(s.top);
                    }
    }
}

double CanonicalProblem::user_plus(const Tensor3& p, std::size_t k) const {
    double r = 0.0;
    for (std::size_t m = 0; m < cfg_->num_rrhs(); ++m) {
        double rm = 0.0;
        for (std::size_t n = 0; n < cfg_->n_subcarriers; ++n) rm += log2_interference_plus(p, *ch_, m, k, n, true);
        r += cfg_->weight(m, k) * rm;
    }
    return r;
}

double CanonicalProblem::user_minus(const Tensor3& p, std::size_t k) const {
    double r = 0.0;
    for (std::size_t m = 0; m < cfg_->num_rrhs(); ++m) {
        double rm = 0.0;
        for (std::size_t n = 0; n < cfg_->n_subcarriers; ++n) rm += log2_interference_plus(p, *ch_, m, k, n, false);
        r += cfg_->weight(m, k) * rm;
    }
    return r;
}

double CanonicalProblem::q_plus(const Tensor3& p) const {
    double r = 0.0;
    for (std::size_t k = 0; k < cfg_->num_users(); ++k)
        if (!cfg_->streaming(k)) r += user_plus(p, k);
    return r;
}

double CanonicalProblem::q_minus(const Tensor3& p) const {
    double r = 0.0;
    for (std::size_t k = 0; k < cfg_->num_users(); ++k)
        if (!cfg_->streaming(k)) r += user_minus(p, k);
    return r + E_ * total_power(PowerAllocation{p}, *cfg_);
}

double CanonicalProblem::stream_minus(const Tensor3& p) const {
    double r = 0.0;
    for (std::size_t k : streaming_) r += user_minus(p, k);
    return r;
}

double CanonicalProblem::stream_plus(const Tensor3& p) const {
    std::vector<double> plus, minus;
    double minus_total = 0.0;
    for (std::size_t k : streaming_) {
        plus.push_back(user_plus(p, k));
        minus.push_back(user_minus(p, k));
        minus_total += minus.back();
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < streaming_.size(); ++i)
        best = std::min(best, plus[i] + (minus_total - minus[i]) - psi_[streaming_[i]]);
    return best;
}

double CanonicalProblem::sic_plus(const Tensor3& p, const SicPair& s) const {
    const ChannelState& ch = *ch_;
    const double gk = ch.gamma(s.m, s.strong, s.n), gw = ch.gamma(s.m, s.weak, s.n);
    const double c = gw * ch.sigma(s.m, s.strong, s.n) - gk * ch.sigma(s.m, s.weak, s.n);
    const double xk = cross_interference(p, ch, s.m, s.strong, s.n);
    return p(s.m, s.strong, s.n) * p(s.m, s.weak, s.n) * (std::max(c, 0.0) + gw * xk);
}

double CanonicalProblem::sic_minus(const Tensor3& p, const SicPair& s) const {
    const ChannelState& ch = *ch_;
    const double gk = ch.gamma(s.m, s.strong, s.n), gw = ch.gamma(s.m, s.weak, s.n);
    const double c = gw * ch.sigma(s.m, s.strong, s.n) - gk * ch.sigma(s.m, s.weak, s.n);
    const double xw = cross_interference(p, ch, s.m, s.weak, s.n);
    return p(s.m, s.strong, s.n) * p(s.m, s.weak, s.n) * (std::max(-c, 0.0) + gk * xw);
}

Tensor3 CanonicalProblem::powers(std::span<const double> x) const {
    Tensor3 p(cfg_->num_rrhs(), cfg_->num_users(), cfg_->n_subcarriers);
    for (std::size_t i = 0; i < links_.size(); ++i)
        p[links_[i]] = std::min(power_ref_[i] * std::expm1(x[i]), cfg_->p_mask[links_[i]]);
    return p;
}

std::vector<double> CanonicalProblem::embed(const Tensor3& p) const {
    std::vector<double> x(upper_.size(), 0.0);
    for (std::size_t i = 0; i < links_.size(); ++i)
        x[i] = std::min(std::log1p(std::max(p[links_[i]], 0.0) / power_ref_[i]), upper_[i]);
    lift(x);
    return x;
}

double CanonicalProblem::objective(std::span<const double> x) const { return q_plus(powers(x)) + x[s1_]; }

bool CanonicalProblem::in_normal(std::span<const double> x) const {
    const NetworkConfig& cfg = *cfg_;
    const Tensor3 p = powers(x);
    const std::size_t M = cfg.num_rrhs(), K = cfg.num_users(), N = cfg.n_subcarriers;
    for (std::size_t m = 0; m < M; ++m) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < N; ++n) s += p(m, k, n);
        if (s > cfg.rrhs[m].p_max) return false;
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t m2 = m + 1; m2 < M; ++m2) {
                double a = 0.0, b = 0.0;
                for (std::size_t n = 0; n < N; ++n) {
                    a = std::max(a, p(m, k, n));
                    b = std::max(b, p(m2, k, n));
                }
                if (a * b > cfg.tol.selection_slack) return false;
            }
    if (K > cfg.l_max) {
        std::vector<double> col(K);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < N; ++n) {
                for (std::size_t k = 0; k < K; ++k) col[k] = p(m, k, n);
                std::partial_sort(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(cfg.l_max + 1), col.end(),
                                  std::greater<>());
                double prod = 1.0;
                for (std::size_t i = 0; i <= cfg.l_max; ++i) prod *= col[i];
                if (prod > cfg.tol.multiplex_slack) return false;
            }
    }
    if (q_minus(p) + x[s1_] > q_minus_top_) return false;
    if (s2_ != npos && stream_minus(p) + x[s2_] > stream_minus_top_) return false;
    for (std::size_t j = 0; j < pairs_.size(); ++j)
        if (sic_plus(p, pairs_[j]) + x[s3_ + j] > pairs_[j].top) return false;
    return true;
}

bool CanonicalProblem::in_conormal(std::span<const double> x) const {
    if (s2_ == npos && pairs_.empty()) return true;
    const Tensor3 p = powers(x);
    // Minimum rates carry the same absolute tolerance as the feasibility checker.
    if (s2_ != npos && stream_plus(p) + x[s2_] < stream_minus_top_ - kRateAbsTol) return false;
    for (std::size_t j = 0; j < pairs_.size(); ++j)
        if (sic_minus(p, pairs_[j]) + x[s3_ + j] < pairs_[j].top * (1.0 - kSicRelTol)) return false;
    return true;
}

void CanonicalProblem::lift(std::span<double> x) const {
    const Tensor3 p = powers(x);
    // Shave a few ulps so the lifted point passes the normal-set test it was derived from.
    auto room = [](double top, double used) { return (top - used) - 1e-12 * (std::abs(top) + std::abs(used)); };
    x[s1_] = std::clamp(room(q_minus_top_, q_minus(p)), 0.0, upper_[s1_]);
    if (s2_ != npos) x[s2_] = std::clamp(room(stream_minus_top_, stream_minus(p)), 0.0, upper_[s2_]);
    for (std::size_t j = 0; j < pairs_.size(); ++j)
        x[s3_ + j] = std::clamp(room(pairs_[j].top, sic_plus(p, pairs_[j])), 0.0, upper_[s3_ + j]);
}

MonotoneProblem CanonicalProblem::as_monotone() const {
    MonotoneProblem mp;
    mp.upper = upper_;
    mp.objective = [this](std::span<const double> x) { return objective(x); };
    mp.in_normal = [this](std::span<const double> x) { return in_normal(x); };
    mp.in_conormal = [this](std::span<const double> x) { return in_conormal(x); };
    mp.lift = [this](std::span<double> x) { lift(x); };
    return mp;
}

Projection project(const MonotoneProblem& problem, std::span<const double> vertex, int steps) {
    std::vector<double> y(vertex.begin(), vertex.end());
    if (problem.in_normal(y)) return {1.0, 1.0};
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double mid = 0.5 * (lo + hi);
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = mid * vertex[j];
        if (problem.in_normal(y)) lo = mid;
        else hi = mid;
    }
    return {lo, hi};
}

bool reduce_vertex(const MonotoneProblem& problem, std::span<double> vertex, double target, int steps) {
    const std::size_t d = vertex.size();
    std::vector<double> y(vertex.begin(), vertex.end());
    if (problem.objective(y) < target || !problem.in_conormal(y)) return false;

    // Lower corner: no useful point can have a coordinate below the level where the corner itself stops
    // reaching the target or leaves the co-normal set.
    std::vector<double> lower(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        auto useful = [&](double t) {
            y[i] = t;
            const bool ok = problem.in_conormal(y) && problem.objective(y) >= target;
            y[i] = vertex[i];
            return ok;
        };
        if (vertex[i] <= 0.0 || useful(0.0)) continue;
        double lo = 0.0, hi = vertex[i];
        for (int s = 0; s < steps; ++s) {
            const double mid = 0.5 * (lo + hi);
            (useful(mid) ? hi : lo) = mid;
        }
        lower[i] = lo;
    }
    if (!problem.in_normal(lower)) return false;

    // Upper corner: push each coordinate of the lower corner up until it leaves the normal set.
    y = lower;
    for (std::size_t i = 0; i < d; ++i) {
        auto inside = [&](double t) {
            y[i] = t;
            const bool ok = problem.in_normal(y);
            y[i] = lower[i];
            return ok;
        };
        if (inside(vertex[i])) continue;
        double lo = lower[i], hi = vertex[i];
        for (int s = 0; s < steps; ++s) {
            const double mid = 0.5 * (lo + hi);
            (inside(mid) ? lo : hi) = mid;
        }
        vertex[i] = hi;
    }
    return true;
}

namespace {

constexpr double kSnapFraction = 1e-6;

struct Vertex {
    std::vector<double> x;
    double f;
    double target;  // objective level the vertex was last shrunk against
};

bool dominates(const std::vector<double>& v, const std::vector<double>& x) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] < x[i]) return false;
    return true;
}

// Whether the box under v meets the closed cone above x in more than a face. Coordinates pinned at zero on
// both sides span no volume and do not count against it.
bool cut_by(const std::vector<double>& v, const std::vector<double>& x) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] <= x[i] && !(v[i] == 0.0 && x[i] == 0.0)) return false;
    return true;
}

}  // namespace

PolyblockResult polyblock_solve(const MonotoneProblem& problem, const PolyblockOptions& opts,
                                std::span<const double> start) {
    PolyblockResult res;
    const std::size_t d = problem.dimension();
    const std::vector<double> origin(d, 0.0);
    const double f0 = problem.objective(origin);
    const double fb = problem.objective(problem.upper);
    res.epsilon = opts.epsilon_abs >= 0.0 ? opts.epsilon_abs : opts.epsilon_rel * std::max(fb - f0, 0.0);
    const double eps = res.epsilon;
    double incumbent = -std::numeric_limits<double>::infinity();

    auto consider = [&](std::vector<double> x) {
        if (problem.lift) problem.lift(x);
        if (!problem.in_normal(x) || !problem.in_conormal(x)) return;
        const double f = problem.objective(x);
        if (f > incumbent) {
            incumbent = f;
            res.point = std::move(x);
        }
    };

    if (!problem.in_normal(origin)) {
        res.status = PolyblockStatus::InfeasibilitySuspected;
        return res;
    }
    consider(origin);
    if (start.size() == d) consider(std::vector<double>(start.begin(), start.end()));

    double evicted_max = -std::numeric_limits<double>::infinity();
    double pruned_max = -std::numeric_limits<double>::infinity();
    double upper_bound = fb;
    // Shrinking discards only points below the target, so the target caps what the discarded part could hold.
    auto shrink = [&](std::vector<double>& x, double& f) {
        if (opts.reduction_steps <= 0) return true;
        const double target = incumbent + eps;
        const bool keep = reduce_vertex(problem, x, target, opts.reduction_steps);
        pruned_max = std::max(pruned_max, std::min(f, target));
        if (keep) f = problem.objective(x);
        return keep;
    };

    std::vector<Vertex> vertices;
    if (problem.in_conormal(problem.upper)) {
        std::vector<double> top = problem.upper;
        double ft = fb;
        if (shrink(top, ft)) vertices.push_back({std::move(top), ft, incumbent + eps});
    }

    for (int it = 0; it < opts.max_iterations; ++it) {
        std::erase_if(vertices, [&](const Vertex& v) {
            if (v.f > incumbent + eps) return false;
            pruned_max = std::max(pruned_max, v.f);
            return true;
        });
        std::size_t best = vertices.size();
        for (std::size_t i = 0; i < vertices.size(); ++i)
            if (best == vertices.size() || vertices[i].f > vertices[best].f) best = i;
        const double best_f = best == vertices.size() ? -std::numeric_limits<double>::infinity() : vertices[best].f;
        upper_bound = std::min(upper_bound, std::max({best_f, evicted_max, pruned_max, incumbent}));
        res.bound_trace.push_back(upper_bound);
        res.incumbent_trace.push_back(incumbent);
        res.iterations = it;
        const bool closed = !res.point.empty() && upper_bound - incumbent <= eps + 1e-12 * (std::abs(incumbent) + eps);
        if (best == vertices.size() || closed) {
            // Running out of vertices only certifies the incumbent when no evicted vertex keeps the bound up.
            res.status = res.point.empty()                  ? PolyblockStatus::InfeasibilitySuspected
                         : closed ? PolyblockStatus::Converged
                                                          : PolyblockStatus::BudgetExhausted;
            res.value = incumbent;
            res.upper_bound = upper_bound;
            res.gap = res.point.empty() ? 0.0 : std::max(0.0, upper_bound - incumbent);
            return res;
        }

        if (opts.reduction_steps > 0 && vertices[best].target < incumbent + eps) {
            Vertex& b = vertices[best];
            if (shrink(b.x, b.f)) b.target = incumbent + eps;
            else vertices.erase(vertices.begin() + static_cast<std::ptrdiff_t>(best));
            continue;
        }

        const std::vector<double> v = vertices[best].x;
        const Projection pr = project(problem, v, opts.bisection_steps);
        std::vector<double> x_lo(d);
        for (std::size_t j = 0; j < d; ++j) x_lo[j] = pr.lambda_lo * v[j];
        consider(x_lo);
        if (pr.lambda_hi >= 1.0) {
            // The whole box under v lies in the normal set, so v itself settles it.
            consider(v);
            vertices.erase(vertices.begin() + static_cast<std::ptrdiff_t>(best));
            continue;
        }
        std::vector<double> x_hi(d);
        for (std::size_t j = 0; j < d; ++j) x_hi[j] = pr.lambda_hi * v[j];

        std::vector<Vertex> next, children;
        next.reserve(vertices.size());
        for (auto& u : vertices) {
            if (!cut_by(u.x, x_hi)) {
                next.push_back(std::move(u));
                continue;
            }
            for (std::size_t i = 0; i < d; ++i) {
                if (u.x[i] <= x_hi[i]) continue;
                std::vector<double> w = u.x;
                // Below resolution a coordinate would only shrink geometrically without changing any
                // bound, so it is snapped to the floor of the box.
                w[i] = x_hi[i] > kSnapFraction * problem.upper[i] ? x_hi[i] : 0.0;
                if (!problem.in_conormal(w)) continue;
                double fw = problem.objective(w);
                if (fw <= incumbent + eps) continue;
                // Children are shrunk lazily, when first selected; until then their corner value still bounds them.
                children.push_back({std::move(w), fw, -std::numeric_limits<double>::infinity()});
            }
        }
        // Drop improper children: those lying under another live vertex. Untouched vertices were
        // proper before this step and cannot sit under a child, so only children need the test.
        std::vector<std::uint8_t> improper(children.size(), 0);
        for (std::size_t c = 0; c < children.size(); ++c) {
            for (const auto& u : next)
                if (dominates(u.x, children[c].x)) {
                    improper[c] = 1;
                    break;
                }
            for (std::size_t o = 0; o < children.size() && !improper[c]; ++o) {
                if (o == c || improper[o] || !dominates(children[o].x, children[c].x)) continue;
                // Equal children: keep the first copy only.
                if (o < c || !dominates(children[c].x, children[o].x)) improper[c] = 1;
            }
        }
        for (std::size_t c = 0; c < children.size(); ++c)
            if (!improper[c]) next.push_back(std::move(children[c]));
        vertices = std::move(next);
        if (vertices.size() > opts.vertex_cap) {
            std::nth_element(vertices.begin(), vertices.end() - static_cast<std::ptrdiff_t>(opts.vertex_cap),
                             vertices.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
            const auto cut = vertices.end() - static_cast<std::ptrdiff_t>(opts.vertex_cap);
            for (auto i = vertices.begin(); i != cut; ++i) evicted_max = std::max(evicted_max, i->f);
            vertices.erase(vertices.begin(), cut);
        }
    }
    res.status = res.point.empty() ? PolyblockStatus::InfeasibilitySuspected : PolyblockStatus::BudgetExhausted;
    res.value = incumbent;
    res.upper_bound = upper_bound;
    res.gap = res.point.empty() ? 0.0 : std::max(0.0, upper_bound - incumbent);
    return res;
}

namespace {

void guard_dimension(const CanonicalProblem& cp, const PolyblockOptions& opts) {
    if (cp.dimension() > opts.max_dimension && !opts.allow_large)
        throw DimensionTooLarge("canonical dimension " + std::to_string(cp.dimension()) + " exceeds the limit of " +
                                std::to_string(opts.max_dimension));
}

}  // namespace

PowerAllocation PolyblockSolver::initial_point(const ChannelState& ch, const NetworkConfig& cfg) {
    const CanonicalProblem cp(ch, cfg, 0.0);
    guard_dimension(cp, opts_);
    // Any feasible allocation serves as the first outer iterate. A local sum-rate solution gives the search
    // an incumbent with a nonzero rate, which the bare initial point may lack when only streaming users are on.
    ScaleSolver heuristic;
    PowerAllocation seed = heuristic.initial_point(ch, cfg);
    InnerResult local = heuristic.solve_fixed_E(ch, cfg, 0.0, seed);
    if (local.stats.code == InnerCode::Infeasible) return seed;
    return surplus(local.alloc, ch, cfg, 0.0) >= surplus(seed, ch, cfg, 0.0) ? local.alloc : seed;
}

InnerResult PolyblockSolver::solve_fixed_E(const ChannelState& ch, const NetworkConfig& cfg, double E,
                                           const PowerAllocation& warm_start) {
    const CanonicalProblem cp(ch, cfg, E);
    guard_dimension(cp, opts_);
    PowerAllocation seed = warm_start;
    if (opts_.local_incumbent && warm_start.p.same_shape(ch.gamma)) {
        ScaleSolver local;
        InnerResult lr = local.solve_fixed_E(ch, cfg, E, warm_start);
        if (lr.stats.code != InnerCode::Infeasible && surplus(lr.alloc, ch, cfg, E) > surplus(warm_start, ch, cfg, E))
            seed = std::move(lr.alloc);
    }
    const std::vector<double> start = seed.p.same_shape(ch.gamma) ? cp.embed(seed.p) : std::vector<double>{};
    PolyblockResult r = polyblock_solve(cp.as_monotone(), opts_, start);
    InnerResult out;
    out.stats.rounds = r.iterations;
    out.stats.gap = r.gap;
    if (r.point.empty()) {
        out.alloc = warm_start;
        out.stats.code = InnerCode::Infeasible;
        out.stats.note = "no feasible vertex projection";
    } else {
        out.alloc.p = cp.powers(r.point);
        out.stats.code = r.status == PolyblockStatus::Converged ? InnerCode::Ok : InnerCode::BudgetExhausted;
    }
    history_.push_back(std::move(r));
    return out;
}

}  // namespace hcran

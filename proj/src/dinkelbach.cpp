#include "hcran/dinkelbach.hpp"

#include <algorithm>

namespace hcran {

double surplus(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg, double E) {
    return weighted_sum_rate(alloc, ch, cfg) - E * total_power(alloc, cfg);
}

DinkelbachTrace solve(const ChannelState& ch, const NetworkConfig& cfg, InnerSolver& inner,
                      const DinkelbachOptions& opts) {
    DinkelbachTrace trace;
    PowerAllocation current = inner.initial_point(ch, cfg);
    double E = 0.0;
    bool converged = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
        InnerResult res = inner.solve_fixed_E(ch, cfg, E, current);
        if (res.stats.code == InnerCode::Infeasible) {
            if (it == 0) throw ProblemInfeasible("inner solver found no feasible allocation at E = 0");
            trace.iterations.push_back({E, surplus(current, ch, cfg, E), res.stats});
            converged = true;
            break;
        }
        // The warm start is itself feasible, so never accept a candidate that does worse on R - E P.
        const double s_new = surplus(res.alloc, ch, cfg, E);
        const double s_old = surplus(current, ch, cfg, E);
        if (s_new >= s_old) current = std::move(res.alloc);
        const double s = std::max(s_new, s_old);
        trace.iterations.push_back({E, s, std::move(res.stats)});
        if (s <= cfg.tol.xi) {
            converged = true;
            break;
        }
        const EnergyReport rep = energy_efficiency(current, ch, cfg);
        E = rep.ee_E;
    }
    trace.cap_hit = !converged;
    trace.E_star = energy_efficiency(current, ch, cfg).ee_E;
    trace.final = std::move(current);
    const bool certified = std::all_of(trace.iterations.begin(), trace.iterations.end(),
                                       [](const DinkelbachIteration& i) { return i.inner.code != InnerCode::BudgetExhausted; });
    trace.globally_optimal = inner.global() && converged && certified;
    return trace;
}

}  // namespace hcran

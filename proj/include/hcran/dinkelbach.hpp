#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hcran/model.hpp"

namespace hcran {

enum class InnerCode { Ok, BudgetExhausted, Infeasible };

/// What an inner solver reports besides the allocation itself.
struct InnerStats {
    InnerCode code = InnerCode::Ok;
    int rounds = 0;             // SCA rounds or polyblock iterations
    int sweeps = 0;             // total inner iterations
    double gap = 0.0;           // certified optimality gap when the solver provides one
    std::vector<double> surrogate_trace;  // per-round surrogate objective, one run after another
    std::vector<std::size_t> trace_breaks;  // indices where an independent run starts inside surrogate_trace
    double kkt_residual = 0.0;
    bool flagged = false;
    std::string note;
};

struct InnerResult {
    PowerAllocation alloc;
    InnerStats stats;
};

class InnerSolver {
public:
    virtual ~InnerSolver() = default;
    /// Starting allocation for the first outer iteration. Throws ProblemInfeasible when none exists.
    virtual PowerAllocation initial_point(const ChannelState& ch, const NetworkConfig& cfg) = 0;
    virtual InnerResult solve_fixed_E(const ChannelState& ch, const NetworkConfig& cfg, double E,
                                      const PowerAllocation& warm_start) = 0;
    /// Whether solve_fixed_E returns certified global optima.
    virtual bool global() const { return false; }
};

class ProblemInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DinkelbachIteration {
    double E = 0.0;
    double surplus = 0.0;
    InnerStats inner;
};

struct DinkelbachTrace {
    std::vector<DinkelbachIteration> iterations;
    double E_star = 0.0;
    PowerAllocation final;
    bool cap_hit = false;
    bool globally_optimal = false;
};

struct DinkelbachOptions {
    int max_iterations = 30;
};

double surplus(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg, double E);

DinkelbachTrace solve(const ChannelState& ch, const NetworkConfig& cfg, InnerSolver& inner,
                      const DinkelbachOptions& opts = {});

}  // namespace hcran

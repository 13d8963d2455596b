#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hcran/dinkelbach.hpp"
#include "hcran/model.hpp"

namespace hcran {

/// Maximise an increasing objective over the box [0, upper] intersected with a normal set and a co-normal set.
struct MonotoneProblem {
    std::vector<double> upper;
    std::function<double(std::span<const double>)> objective;
    std::function<bool(std::span<const double>)> in_normal;
    std::function<bool(std::span<const double>)> in_conormal;
    /// Optional: raise auxiliary coordinates of a normal-set point as far as the normal set allows.
    std::function<void(std::span<double>)> lift;

    std::size_t dimension() const noexcept { return upper.size(); }
};

/// Fixed-E problem in canonical monotone form over (powers, s1, [s2], s3...).
/// Power coordinates are stored as log(1 + p / p_ref) with p_ref a small fraction of the mask, an increasing
/// change of variable that keeps every set normal or co-normal while resolving low powers finely.
/// `powers` and `embed` convert between the two.
class CanonicalProblem {
public:
    CanonicalProblem(const ChannelState& ch, const NetworkConfig& cfg, double E);

    std::size_t dimension() const noexcept { return upper_.size(); }
    std::size_t power_count() const noexcept { return links_.size(); }
    bool has_rate_aux() const noexcept { return s2_ != npos; }
    std::size_t sic_aux_count() const noexcept { return pairs_.size(); }
    std::span<const double> upper() const noexcept { return upper_; }

    /// Increasing part of the rate sum: sum of w log2(noise + interference + own signal).
    double q_plus(const Tensor3& p) const;
    /// Decreasing part moved to the other side: sum of w log2(noise + interference) plus E times total power.
    double q_minus(const Tensor3& p) const;

    double objective(std::span<const double> x) const;
    bool in_normal(std::span<const double> x) const;
    bool in_conormal(std::span<const double> x) const;
    /// Sets every auxiliary to its largest value allowed by the normal set at the point's powers.
    void lift(std::span<double> x) const;

    Tensor3 powers(std::span<const double> x) const;
    std::vector<double> embed(const Tensor3& p) const;  // powers plus lifted auxiliaries

    /// q_minus(mask): the constant separating the canonical objective from R - E P.
    double offset() const noexcept { return q_minus_top_; }

    MonotoneProblem as_monotone() const;

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    struct SicPair {
        std::size_t m, n, strong, weak;
        double top;  // increasing part at the mask corner
    };

    double stream_plus(const Tensor3& p) const;   // min over streaming users, shifted by their targets
    double stream_minus(const Tensor3& p) const;  // sum over streaming users
    double user_plus(const Tensor3& p, std::size_t k) const;
    double user_minus(const Tensor3& p, std::size_t k) const;
    double sic_plus(const Tensor3& p, const SicPair& s) const;
    double sic_minus(const Tensor3& p, const SicPair& s) const;

    const ChannelState* ch_;
    const NetworkConfig* cfg_;
    double E_;
    static constexpr double kPowerRefFraction = 1e-2;

    std::vector<std::size_t> links_;
    std::vector<double> power_ref_;
    std::vector<double> upper_;
    std::vector<double> psi_;
    std::vector<std::size_t> streaming_;
    std::vector<SicPair> pairs_;
    std::size_t s1_ = 0, s2_ = npos, s3_ = 0;
    double q_minus_top_ = 0.0, stream_minus_top_ = 0.0;
};

struct PolyblockOptions {
    int max_iterations = 200000;  // vertex selections
    int bisection_steps = 48;
    int reduction_steps = 24;  // bisection steps per coordinate when shrinking a vertex; 0 disables shrinking
    std::size_t vertex_cap = 5000;
    double epsilon_rel = 1e-2;  // tolerance as a fraction of f(upper) - f(0)
    double epsilon_abs = -1.0;  // overrides epsilon_rel when non-negative
    std::size_t max_dimension = 24;
    bool allow_large = false;
    bool local_incumbent = true;  // PolyblockSolver: seed the incumbent with a local solve at the same E
};

enum class PolyblockStatus { Converged, BudgetExhausted, InfeasibilitySuspected };

struct PolyblockResult {
    PolyblockStatus status = PolyblockStatus::InfeasibilitySuspected;
    std::vector<double> point;  // incumbent, empty when none was found
    double value = 0.0;         // objective at the incumbent
    double upper_bound = 0.0;
    double gap = 0.0;
    double epsilon = 0.0;
    int iterations = 0;
    std::vector<double> bound_trace;      // best upper bound after each iteration
    std::vector<double> incumbent_trace;  // incumbent value after each iteration
};

/// Largest lambda in [0, 1] with lambda * vertex in the normal set, bracketed by bisection.
struct Projection {
    double lambda_lo = 0.0;  // inside
    double lambda_hi = 1.0;  // outside unless the vertex itself is inside
};
Projection project(const MonotoneProblem& problem, std::span<const double> vertex, int steps);

/// Shrinks `vertex` to the smallest corner whose box still holds every point of the normal and co-normal sets
/// with objective at least `target`. Returns false when no such point can exist under the vertex.
bool reduce_vertex(const MonotoneProblem& problem, std::span<double> vertex, double target, int steps);

/// `start`, when non-empty, is a known point of the problem used as the first incumbent if it is feasible.
PolyblockResult polyblock_solve(const MonotoneProblem& problem, const PolyblockOptions& opts = {},
                                std::span<const double> start = {});

class DimensionTooLarge : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class PolyblockSolver final : public InnerSolver {
public:
    explicit PolyblockSolver(PolyblockOptions opts = {}) : opts_(opts) {}

    PowerAllocation initial_point(const ChannelState& ch, const NetworkConfig& cfg) override;
    InnerResult solve_fixed_E(const ChannelState& ch, const NetworkConfig& cfg, double E,
                              const PowerAllocation& warm_start) override;
    bool global() const override { return true; }

    const std::vector<PolyblockResult>& history() const noexcept { return history_; }

private:
    PolyblockOptions opts_;
    std::vector<PolyblockResult> history_;
};

}  // namespace hcran

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "hcran/dinkelbach.hpp"
#include "hcran/model.hpp"

namespace hcran {

/// Per-link coefficients of the log lower bound alpha*log2(z) + beta <= log2(1 + z).
struct ScaleCoefficients {
    Tensor3 alpha;
    Tensor3 beta;

    static ScaleCoefficients high_sir(std::size_t rrhs, std::size_t users, std::size_t subcarriers);
};

/// Coefficients tight at z0; nonpositive z0 falls back to the high-SIR pair (1, 0).
std::pair<double, double> scale_coeffs(double z0);

/// beta + alpha*log2(sinr); -infinity when the link carries no signal.
double approx_rate(const PowerAllocation& alloc, const ChannelState& ch, const ScaleCoefficients& coeffs,
                   std::size_t m, std::size_t k, std::size_t n);

/// Linearisation of g(p) = G_k p_k p_kw X_kw(p) around a previous allocation.
/// g is convex in log-powers, so its tangent there is a global minorant for positive powers.
struct DcLinearization {
    double value = 0.0;                                  // g at the expansion point
    std::vector<std::pair<std::size_t, double>> gradient;  // (flat link index, dg/dp)

    /// Tangent in log-power coordinates: value + sum dg/dp_i * p0_i * ln(p_i / p0_i).
    double evaluate(const Tensor3& expansion, const Tensor3& p) const;
};

DcLinearization dc_linearize(const PowerAllocation& prev, const ChannelState& ch, std::size_t m, std::size_t k,
                             std::size_t kw, std::size_t n);

/// Convex part of the decoding-order product: p_k p_kw (G_kw sigma_k - G_k sigma_kw + G_kw X_k).
double sic_convex_part(const Tensor3& p, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t kw,
                       std::size_t n);

struct SelectionKey {
    std::uint32_t user, rrh_a, sub_a, rrh_b, sub_b;  // rrh_a < rrh_b
    auto operator<=>(const SelectionKey&) const = default;
};

struct MultiplexKey {
    std::uint32_t rrh, sub;
    std::array<std::uint16_t, 8> members{};  // ascending, first `count` entries used
    std::uint8_t count = 0;
    auto operator<=>(const MultiplexKey&) const = default;
};

struct SicKey {
    std::uint32_t rrh, sub, strong, weak;
    auto operator<=>(const SicKey&) const = default;
};

/// Lagrange multipliers. Product and decoding-order families are stored sparsely: absent means zero.
struct DualState {
    std::vector<double> xi;    // per RRH power budget
    std::vector<double> zeta;  // per streaming user minimum rate
    std::map<SelectionKey, double> theta;
    std::map<MultiplexKey, double> theta_p;
    std::map<SicKey, double> zeta_t;

    static DualState zeros(std::size_t rrhs, std::size_t users);
    bool nonnegative() const;
};

/// Signed residuals (positive = violated) together with the scale used to step each multiplier.
struct Residual {
    double violation = 0.0;
    double scale = 1.0;
};

struct ConstraintSlacks {
    std::vector<Residual> budget;
    std::vector<Residual> min_rate;
    std::map<SelectionKey, Residual> selection;
    std::map<MultiplexKey, Residual> multiplex;
    std::map<SicKey, Residual> sic;
};

/// step = a / sqrt(v) * (scale + relative * mu); relative = 0 gives the plain subgradient rule.
struct StepRule {
    double a = 0.1;
    int v = 1;
    double relative = 0.0;
    double cap = 1e8;

    double step(const Residual& r, double mu) const;
};

DualState dual_update(const DualState& duals, const ConstraintSlacks& slacks, const StepRule& rule);

/// Numerator and denominator contributions of the closed-form power update for one link.
struct ScaleDualTerms {
    double rate_weight = 0.0;       // weighted alpha / ln 2 (scaled by the min-rate multiplier for streaming)
    double power_cost = 0.0;        // E * eta, elastic users only
    double budget = 0.0;            // budget multiplier of the serving RRH
    double same_rrh = 0.0;          // pressure from weaker users sharing the subcarrier
    double cross_rrh = 0.0;         // pressure from users served by other RRHs
    double selection = 0.0;         // one-RRH-per-user product multipliers
    double multiplexing = 0.0;      // users-per-subcarrier product multipliers
    double sic_denominator = 0.0;   // decoding-order terms that push the power down
    double sic_numerator = 0.0;     // decoding-order terms that push the power up (already times p)

    double numerator() const noexcept { return rate_weight + sic_numerator; }
    double denominator() const noexcept {
        return power_cost + budget + same_rrh + cross_rrh + selection + multiplexing + sic_denominator;
    }
};

struct UpdateOutcome {
    double power = 0.0;
    bool flagged = false;  // denominator hit the floor
};

UpdateOutcome elastic_power_update(const ScaleDualTerms& t, double mask);
UpdateOutcome streaming_power_update(const ScaleDualTerms& t, double mask);

/// Everything one Jacobi sweep reads: the frozen powers plus the aggregates derived from them.
class SweepSnapshot {
public:
    struct Inputs {
        const ChannelState* ch = nullptr;
        const NetworkConfig* cfg = nullptr;
        double E = 0.0;
        const Tensor3* p = nullptr;
        const std::vector<std::uint8_t>* active = nullptr;  // nullptr = every link
        const ScaleCoefficients* coeffs = nullptr;
        const DualState* duals = nullptr;
        const Tensor3* expansion = nullptr;  // decoding-order linearisation point
        double power_floor_rel = 1e-12;
        int workers = 1;  // threads used to build the per-subcarrier aggregates
    };

    explicit SweepSnapshot(const Inputs& in);

    ScaleDualTerms terms(std::size_t m, std::size_t k, std::size_t n) const;
    UpdateOutcome update(std::size_t m, std::size_t k, std::size_t n) const;
    double sinr(std::size_t i) const { return sinr_[i]; }
    bool active(std::size_t i) const { return in_.active == nullptr || (*in_.active)[i] != 0; }

private:
    Inputs in_;
    std::size_t M_, K_, N_;
    std::vector<double> sinr_, phi_, same_, cross_mn_, selection_, multiplex_, sic_den_, sic_num_;
};

struct ScaleOptions {
    double step_a = 0.3;
    double power_floor_rel = 1e-12;
    double multiplier_cap = 1e8;
    bool reselect_each_call = true;  // when false, only the first call after initial_point reselects
    int workers = 1;
    int max_sic_prunes = 64;
    // Caps for the relaxed support-selection phase; zero or less falls back to the configured tolerances.
    int relaxed_rounds = 5;
    int relaxed_inner_iters = 100;
};

struct ScaleTraceRow {
    int phase = 0;
    int round = 0;
    double surrogate = 0.0;
    double max_violation = 0.0;
    double step_norm = 0.0;
};

class ScaleSolver final : public InnerSolver {
public:
    explicit ScaleSolver(ScaleOptions opts = {}) : opts_(opts) {}

    PowerAllocation initial_point(const ChannelState& ch, const NetworkConfig& cfg) override;
    InnerResult solve_fixed_E(const ChannelState& ch, const NetworkConfig& cfg, double E,
                              const PowerAllocation& warm_start) override;

    const std::vector<ScaleTraceRow>& trace() const noexcept { return trace_; }
    void clear_trace() { trace_.clear(); }
    const ScaleOptions& options() const noexcept { return opts_; }

private:
    ScaleOptions opts_;
    std::vector<ScaleTraceRow> trace_;
    bool first_call_ = true;
};

/// Surrogate objective sum of weighted elastic approximate rates minus E times total power.
double surrogate_objective(const Tensor3& p, const ChannelState& ch, const NetworkConfig& cfg,
                           const ScaleCoefficients& coeffs, double E, double power_floor_rel = 1e-12);

}  // namespace hcran

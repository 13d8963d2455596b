#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcran {

/// Dense (rrh, user, subcarrier) tensor stored row-major.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t rrhs, std::size_t users, std::size_t subcarriers, double fill = 0.0)
        : rrhs_(rrhs), users_(users), subcarriers_(subcarriers),
          data_(rrhs * users * subcarriers, fill) {}

    std::size_t rrhs() const noexcept { return rrhs_; }
    std::size_t users() const noexcept { return users_; }
    std::size_t subcarriers() const noexcept { return subcarriers_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t index(std::size_t m, std::size_t k, std::size_t n) const noexcept {
        return (m * users_ + k) * subcarriers_ + n;
    }
    double& operator()(std::size_t m, std::size_t k, std::size_t n) noexcept { return data_[index(m, k, n)]; }
    double operator()(std::size_t m, std::size_t k, std::size_t n) const noexcept { return data_[index(m, k, n)]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const Tensor3& o) const noexcept {
        return rrhs_ == o.rrhs_ && users_ == o.users_ && subcarriers_ == o.subcarriers_;
    }
    bool operator==(const Tensor3&) const = default;

private:
    std::size_t rrhs_ = 0, users_ = 0, subcarriers_ = 0;
    std::vector<double> data_;
};

struct Position {
    double x = 0.0;
    double y = 0.0;
};

enum class TrafficKind { Elastic, Streaming };

/// M/G/1 traffic description of a streaming user.
struct TrafficSpec {
    double lambda = 0.0;       // packets per second
    double t_max = 0.0;        // delay bound, seconds
    double packet_bits = 0.0;  // mean packet size
    std::optional<double> q_len;

    static TrafficSpec from_queue(double q_len, double lambda, double packet_bits);
};

struct UserSpec {
    TrafficKind kind = TrafficKind::Elastic;
    Position position;
    std::optional<TrafficSpec> traffic;

    bool streaming() const noexcept { return kind == TrafficKind::Streaming; }
};

enum class NodeTier { High, Low };

/// One radio head and its share of the static power budget.
struct RrhSpec {
    NodeTier tier = NodeTier::Low;
    Position position;
    double p_max = 0.0;      // watts
    double eta = 1.0;        // amplifier inefficiency multiplier
    double p_fiber = 0.0;    // fronthaul power, watts
    double p_circuit = 0.0;  // circuit power, watts
};

struct Tolerances {
    double xi = 0.01;                // Dinkelbach stop on the surplus
    double inner_rel = 1e-4;         // v-loop stop, fraction of the smallest p_max
    double outer_rel = 1e-3;         // s-loop stop, fraction of the smallest p_max
    int max_sca_rounds = 20;
    int max_inner_iters = 500;
    double selection_slack = 0.0;    // product bound for the one-RRH-per-user constraint
    double multiplex_slack = 0.0;    // product bound for the users-per-subcarrier constraint
};

class NetworkConfig {
public:
    std::vector<RrhSpec> rrhs;
    std::vector<UserSpec> users;
    std::size_t n_subcarriers = 0;
    double subcarrier_bw = 0.0;  // Hz
    std::size_t l_max = 3;
    Tensor3 p_mask;                      // watts per (m,k,n)
    std::vector<double> weights;         // row-major (m,k)
    Tolerances tol;

    std::size_t num_rrhs() const noexcept { return rrhs.size(); }
    std::size_t num_users() const noexcept { return users.size(); }
    std::size_t low_tier_count() const noexcept;
    double weight(std::size_t m, std::size_t k) const noexcept { return weights[m * users.size() + k]; }
    bool streaming(std::size_t k) const noexcept { return users[k].streaming(); }
    double static_power() const noexcept;
    double max_mask() const noexcept;
    double min_p_max() const noexcept;

    /// Fills masks with p_max/N, unit weights and the default product slacks.
    void apply_defaults();
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct ChannelState {
    Tensor3 gamma;  // linear channel power gain
    Tensor3 sigma;  // noise power, watts
};

struct PowerAllocation {
    Tensor3 p;
};

struct Binaries {
    std::vector<std::uint8_t> rho;  // (m,k,n) row-major
    std::vector<std::uint8_t> a;    // (m,k) row-major
};

struct EnergyReport {
    double sum_rate_R = 0.0;
    double total_power_P = 0.0;
    double ee_E = 0.0;
};

// Declared feasibility tolerances for the checks that are not exact.
inline constexpr double kBudgetRelTol = 1e-6;  // per-RRH power budget, relative
inline constexpr double kRateAbsTol = 1e-6;    // streaming minimum rate, bits/s/Hz
inline constexpr double kSicRelTol = 1e-9;     // decoding-order margin, relative to its magnitude

enum class ConstraintId { Mask, Selection, Multiplexing, Budget, MinRate, Sic };
std::string to_string(ConstraintId c);

struct Violation {
    ConstraintId constraint;
    std::string where;
    double magnitude;
};

struct FeasibilityReport {
    std::vector<Violation> violations;
    bool feasible() const noexcept { return violations.empty(); }
    bool has(ConstraintId c) const noexcept;
};

/// True when user i is decoded after user k on (m,n), i.e. i has the stronger channel.
inline bool stronger(const ChannelState& ch, std::size_t m, std::size_t i, std::size_t k, std::size_t n) {
    const double gi = ch.gamma(m, i, n), gk = ch.gamma(m, k, n);
    return gi > gk || (gi == gk && i < k);
}

/// Interference seen by user k on (m,n), excluding noise.
double interference(const Tensor3& p, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n);
double sinr(const PowerAllocation& alloc, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n);
double user_rate(const PowerAllocation& alloc, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n);

/// Every link's SINR in O(M K N (M + K)).
Tensor3 sinr_field(const Tensor3& p, const ChannelState& ch);

/// Σ_m w[m][k] Σ_n rate for a single user.
double user_total_rate(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg, std::size_t k);
double weighted_sum_rate(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg);
double total_power(const PowerAllocation& alloc, const NetworkConfig& cfg);
EnergyReport energy_efficiency(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg);

/// Cross-RRH interference reaching user k on subcarrier n from every RRH except m.
double cross_interference(const Tensor3& p, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t n);

/// Decoding-order margin for strong user k and weak user kw on (m,n); nonpositive means valid.
double sic_margin(const PowerAllocation& alloc, const ChannelState& ch, std::size_t m, std::size_t k, std::size_t kw,
                  std::size_t n);

FeasibilityReport check_feasibility(const PowerAllocation& alloc, const ChannelState& ch, const NetworkConfig& cfg,
                                    std::span<const double> streaming_min_rates);

/// Powers at or below this level count as switched off.
double binarization_threshold(const NetworkConfig& cfg);
Binaries derive_binaries(const PowerAllocation& alloc, const NetworkConfig& cfg);

double dbm_to_watt(double dbm);

}  // namespace hcran

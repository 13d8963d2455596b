#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcran/dinkelbach.hpp"
#include "hcran/model.hpp"
#include "hcran/polyblock.hpp"

namespace hcran {

enum class Architecture { HCRAN, CRAN, HCN, HPN1 };
enum class SweepVariable { None, Users, StreamingUsers, ArrivalRate, LowPowerNodes };
enum class SolverKind { Scale, Polyblock };

std::string to_string(Architecture a);
std::string to_string(SweepVariable v);
Architecture parse_architecture(const std::string& s);
SweepVariable parse_sweep_variable(const std::string& s);
SolverKind parse_solver(const std::string& s);

class PlacementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One experiment: the network family, the traffic mix and what to sweep.
struct Scenario {
    Architecture architecture = Architecture::HCRAN;
    std::size_t l_max = 3;  // users per subcarrier; 1 is OMA
    std::size_t users = 12;
    std::size_t streaming_users = 6;
    std::optional<std::size_t> low_power_nodes;  // architecture default when unset
    double arrival_rate = 125.0;                 // packets/s
    double queue_length = 25.0;                  // packets
    double packet_bits = 1024.0;
    std::size_t subcarriers = 32;
    double bandwidth_hz = 1.0e6;
    double noise_dbm_per_hz = -174.0;
    double coverage_diameter_m = 1000.0;
    double lpn_ring_radius_m = 250.0;
    double hpn_power_dbm = 42.0;
    double lpn_power_dbm = 23.0;
    std::optional<double> spectral_mask_w;  // p_max / N when unset
    double xi = 0.01;
    std::size_t draws = 50;
    std::uint64_t seed = 1;
    SolverKind solver = SolverKind::Scale;
    SweepVariable sweep = SweepVariable::None;
    std::vector<double> sweep_values;

    std::size_t low_power_node_count() const;
    /// Stable textual form used for hashing and CSV headers.
    std::string canonical() const;
    /// Copy with the sweep variable set to `value`.
    Scenario at(double value) const;
};

/// RRHs and traffic for a scenario, users placed uniformly in the coverage disc using `placement_seed`.
NetworkConfig build_network(const Scenario& s, std::uint64_t placement_seed);

/// Gamma = chi * d^-3 with chi ~ Exp(1) drawn independently per link, plus the per-subcarrier noise floor.
ChannelState gen_channel(const NetworkConfig& cfg, std::uint64_t seed, double noise_w_per_subcarrier);
ChannelState gen_channel(const NetworkConfig& cfg, std::uint64_t seed);

double noise_per_subcarrier(const Scenario& s);

/// A network small enough for exhaustive or global solvers: 1-2 RRHs, 2-3 users, 1-2 subcarriers.
struct TinyInstance {
    NetworkConfig cfg;
    ChannelState ch;
};
TinyInstance tiny_instance(std::uint64_t seed);

/// SCALE and polyblock run through the same outer loop on one tiny instance.
struct GapOutcome {
    std::size_t rrhs = 0, users = 0, subcarriers = 0, dimension = 0;
    double scale_ee = 0.0, polyblock_ee = 0.0;
    double epsilon_ee = 0.0;  // the polyblock tolerance translated into efficiency units
    bool scale_feasible = false, polyblock_feasible = false;
    bool certified = false;  // every polyblock call closed its gap
    double scale_ms = 0.0, polyblock_ms = 0.0;
    std::string note;
};
GapOutcome compare_on_tiny(std::uint64_t seed, const PolyblockOptions& opts = {});

struct LoadedConfig {
    Scenario scenario;
    NetworkConfig network;
};

/// Reads a YAML mapping; every key is optional and unknown keys are rejected by name.
LoadedConfig load_config(const std::string& path);
LoadedConfig parse_config(const std::string& text);

/// FNV-1a 64-bit.
std::uint64_t fnv1a(const std::string& text);

struct DrawOutcome {
    double ee = 0.0, sum_rate = 0.0, power = 0.0;
    int iterations = 0;
    double wall_ms = 0.0;
    bool flagged = false;
    std::string note;
};

struct SweepRow {
    double value = 0.0;
    double ee = 0.0;
    double sum_rate = 0.0;
    double power = 0.0;
    double iterations = 0.0;
    double wall_ms = 0.0;
    std::size_t flagged = 0;
};

struct SweepOptions {
    int workers = 1;
    bool timing = true;
};

/// Solves one channel draw of a scenario; infeasible or invalid results come back flagged.
DrawOutcome solve_draw(const Scenario& s, std::uint64_t draw_seed);

/// One row per sweep value, each averaged over the scenario's draws (seed + global draw index).
std::vector<SweepRow> run_sweep(const Scenario& s, const SweepOptions& opts = {});

void write_sweep_csv(std::ostream& os, const Scenario& s, const std::vector<SweepRow>& rows);
void write_plot_script(std::ostream& os, const Scenario& s, const std::string& csv_path);

std::string git_revision();

}  // namespace hcran

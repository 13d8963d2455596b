#include "hcran/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "hcran/polyblock.hpp"
#include "hcran/scale.hpp"
#include "hcran/traffic.hpp"

#ifndef HCRAN_GIT_REV
#define HCRAN_GIT_REV "unknown"
#endif

namespace hcran {

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::HCRAN: return "hcran";
        case Architecture::CRAN: return "cran";
        case Architecture::HCN: return "hcn";
        case Architecture::HPN1: return "hpn1";
    }
    return "?";
}

std::string to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::None: return "none";
        case SweepVariable::Users: return "users";
        case SweepVariable::StreamingUsers: return "streaming_users";
        case SweepVariable::ArrivalRate: return "arrival_rate";
        case SweepVariable::LowPowerNodes: return "low_power_nodes";
    }
    return "?";
}

Architecture parse_architecture(const std::string& s) {
    if (s == "hcran") return Architecture::HCRAN;
    if (s == "cran") return Architecture::CRAN;
    if (s == "hcn") return Architecture::HCN;
    if (s == "hpn1") return Architecture::HPN1;
    throw ConfigError("architecture: expected one of hcran, cran, hcn, hpn1 (got '" + s + "')");
}

SweepVariable parse_sweep_variable(const std::string& s) {
    for (auto v : {SweepVariable::None, SweepVariable::Users, SweepVariable::StreamingUsers, SweepVariable::ArrivalRate,
                   SweepVariable::LowPowerNodes})
        if (to_string(v) == s) return v;
    throw ConfigError("sweep.variable: unknown sweep variable '" + s + "'");
}

SolverKind parse_solver(const std::string& s) {
    if (s == "scale") return SolverKind::Scale;
    if (s == "polyblock") return SolverKind::Polyblock;
    throw ConfigError("solver: expected scale or polyblock (got '" + s + "')");
}

std::size_t Scenario::low_power_node_count() const {
    if (low_power_nodes) return *low_power_nodes;
    switch (architecture) {
        case Architecture::HCRAN: return 2;
        case Architecture::CRAN: return 3;
        case Architecture::HCN: return 2;
        case Architecture::HPN1: return 0;
    }
    return 0;
}

std::string Scenario::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "architecture=" << to_string(architecture) << '\n'
       << "l_max=" << l_max << '\n'
       << "users=" << users << '\n'
       << "streaming_users=" << streaming_users << '\n'
       << "low_power_nodes=" << low_power_node_count() << '\n'
       << "arrival_rate=" << arrival_rate << '\n'
       << "queue_length=" << queue_length << '\n'
       << "packet_bits=" << packet_bits << '\n'
       << "subcarriers=" << subcarriers << '\n'
       << "bandwidth_hz=" << bandwidth_hz << '\n'
       << "noise_dbm_per_hz=" << noise_dbm_per_hz << '\n'
       << "coverage_diameter_m=" << coverage_diameter_m << '\n'
       << "lpn_ring_radius_m=" << lpn_ring_radius_m << '\n'
       << "hpn_power_dbm=" << hpn_power_dbm << '\n'
       << "lpn_power_dbm=" << lpn_power_dbm << '\n'
       << "spectral_mask_w=" << (spectral_mask_w ? std::to_string(*spectral_mask_w) : "auto") << '\n'
       << "xi=" << xi << '\n'
       << "draws=" << draws << '\n'
       << "seed=" << seed << '\n'
       << "solver=" << (solver == SolverKind::Scale ? "scale" : "polyblock") << '\n'
       << "sweep=" << to_string(sweep);
    for (double v : sweep_values) os << ',' << v;
    os << '\n';
    return os.str();
}

Scenario Scenario::at(double value) const {
    Scenario s = *this;
    const auto count = static_cast<std::size_t>(std::llround(value));
    switch (sweep) {
        case SweepVariable::None: break;
        case SweepVariable::Users: s.users = count; break;
        case SweepVariable::StreamingUsers: s.streaming_users = count; break;
        case SweepVariable::ArrivalRate: s.arrival_rate = value; break;
        case SweepVariable::LowPowerNodes: s.low_power_nodes = count; break;
    }
    return s;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RrhSpec node(NodeTier tier, Position pos, double p_max, double eta, double fiber, double circuit) {
    RrhSpec r;
    r.tier = tier;
    r.position = pos;
    r.p_max = p_max;
    r.eta = eta;
    r.p_fiber = fiber;
    r.p_circuit = circuit;
    return r;
}

std::vector<Position> ring(std::size_t count, double radius) {
    std::vector<Position> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
        out.push_back({radius * std::cos(angle), radius * std::sin(angle)});
    }
    return out;
}

}  // namespace

double noise_per_subcarrier(const Scenario& s) {
    return dbm_to_watt(s.noise_dbm_per_hz) * s.bandwidth_hz / static_cast<double>(s.subcarriers);
}

NetworkConfig build_network(const Scenario& s, std::uint64_t placement_seed) {
    NetworkConfig cfg;
    const double hpn = dbm_to_watt(s.hpn_power_dbm), lpn = dbm_to_watt(s.lpn_power_dbm);
    const std::size_t lows = s.low_power_node_count();
    switch (s.architecture) {
        case Architecture::HCRAN:
            cfg.rrhs.push_back(node(NodeTier::High, {0.0, 0.0}, hpn, 4.0, 3.0, 3.0));
            for (const auto& p : ring(lows, s.lpn_ring_radius_m))
                cfg.rrhs.push_back(node(NodeTier::Low, p, lpn, 2.0, 1.0, 0.1));
            break;
        case Architecture::CRAN:
            for (const auto& p : ring(lows, s.lpn_ring_radius_m))
                cfg.rrhs.push_back(node(NodeTier::Low, p, lpn, 2.0, 1.0, 0.1));
            break;
        case Architecture::HCN:
            cfg.rrhs.push_back(node(NodeTier::High, {0.0, 0.0}, hpn, 4.0, 0.0, 10.0));
            for (const auto& p : ring(lows, s.lpn_ring_radius_m))
                cfg.rrhs.push_back(node(NodeTier::Low, p, lpn, 4.0, 0.0, 6.8));
            break;
        case Architecture::HPN1:
            cfg.rrhs.push_back(node(NodeTier::High, {-s.lpn_ring_radius_m, 0.0}, hpn, 4.0, 0.0, 10.0));
            cfg.rrhs.push_back(node(NodeTier::High, {s.lpn_ring_radius_m, 0.0}, hpn, 4.0, 0.0, 10.0));
            break;
    }

    std::mt19937_64 rng(splitmix(placement_seed));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double radius = 0.5 * s.coverage_diameter_m;
    for (std::size_t k = 0; k < s.users; ++k) {
        UserSpec u;
        const double r = radius * std::sqrt(unit(rng));
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        u.position = {r * std::cos(theta), r * std::sin(theta)};
        if (k < s.streaming_users) {
            u.kind = TrafficKind::Streaming;
            u.traffic = TrafficSpec::from_queue(s.queue_length, s.arrival_rate, s.packet_bits);
        }
        cfg.users.push_back(u);
    }
    cfg.n_subcarriers = s.subcarriers;
    cfg.subcarrier_bw = s.bandwidth_hz / static_cast<double>(s.subcarriers);
    cfg.l_max = s.l_max;
    cfg.tol.xi = s.xi;
    cfg.apply_defaults();
    if (s.spectral_mask_w)
        for (double& v : cfg.p_mask.values()) v = *s.spectral_mask_w;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

ChannelState gen_channel(const NetworkConfig& cfg, std::uint64_t seed, double noise_w_per_subcarrier) {
    const std::size_t M = cfg.num_rrhs(), K = cfg.num_users(), N = cfg.n_subcarriers;
    ChannelState ch{Tensor3(M, K, N), Tensor3(M, K, N, noise_w_per_subcarrier)};
    std::mt19937_64 rng(splitmix(seed ^ 0xC4A77E1ULL));
    std::exponential_distribution<double> chi(1.0);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k) {
            const double d = std::hypot(cfg.rrhs[m].position.x - cfg.users[k].position.x,
                                        cfg.rrhs[m].position.y - cfg.users[k].position.y);
            if (!(d > 0.0))
                throw PlacementError("user " + std::to_string(k) + " sits on RRH " + std::to_string(m));
            const double loss = std::pow(d, -3.0);
            for (std::size_t n = 0; n < N; ++n) ch.gamma(m, k, n) = chi(rng) * loss;
        }
    return ch;
}

ChannelState gen_channel(const NetworkConfig& cfg, std::uint64_t seed) {
    return gen_channel(cfg, seed, dbm_to_watt(-174.0) * cfg.subcarrier_bw);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

template <class T>
T read(const YAML::Node& node, const std::string& key) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(key + ": value has the wrong type");
    }
}

template <class T>
void positive(const std::string& key, T v) {
    if (!(v > T{})) throw ConfigError(key + ": must be positive");
}

}  // namespace

LoadedConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: not valid YAML (") + e.what() + ")");
    }
    Scenario s;
    if (root && !root.IsNull()) {
        if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
        for (const auto& kv : root) {
            const std::string key = kv.first.as<std::string>();
            const YAML::Node& v = kv.second;
            if (key == "architecture") s.architecture = parse_architecture(read<std::string>(v, key));
            else if (key == "multiplexing") {
                const auto m = read<std::string>(v, key);
                if (m == "noma") s.l_max = 3;
                else if (m == "oma") s.l_max = 1;
                else throw ConfigError("multiplexing: expected noma or oma");
            } else if (key == "users_per_subcarrier") s.l_max = read<std::size_t>(v, key);
            else if (key == "users") s.users = read<std::size_t>(v, key);
            else if (key == "streaming_users") s.streaming_users = read<std::size_t>(v, key);
            else if (key == "low_power_nodes") s.low_power_nodes = read<std::size_t>(v, key);
            else if (key == "arrival_rate") s.arrival_rate = read<double>(v, key);
            else if (key == "queue_length") s.queue_length = read<double>(v, key);
            else if (key == "packet_bits") s.packet_bits = read<double>(v, key);
            else if (key == "subcarriers") s.subcarriers = read<std::size_t>(v, key);
            else if (key == "bandwidth_hz") s.bandwidth_hz = read<double>(v, key);
            else if (key == "noise_dbm_per_hz") s.noise_dbm_per_hz = read<double>(v, key);
            else if (key == "coverage_diameter_m") s.coverage_diameter_m = read<double>(v, key);
            else if (key == "lpn_ring_radius_m") s.lpn_ring_radius_m = read<double>(v, key);
            else if (key == "hpn_power_dbm") s.hpn_power_dbm = read<double>(v, key);
            else if (key == "lpn_power_dbm") s.lpn_power_dbm = read<double>(v, key);
            else if (key == "spectral_mask_w") s.spectral_mask_w = read<double>(v, key);
            else if (key == "xi") s.xi = read<double>(v, key);
            else if (key == "draws") s.draws = read<std::size_t>(v, key);
            else if (key == "seed") s.seed = read<std::uint64_t>(v, key);
            else if (key == "solver") s.solver = parse_solver(read<std::string>(v, key));
            else if (key == "sweep") {
                if (!v.IsMap()) throw ConfigError("sweep: must be a mapping with variable and values");
                for (const auto& sv : v) {
                    const std::string sk = sv.first.as<std::string>();
                    if (sk == "variable") s.sweep = parse_sweep_variable(read<std::string>(sv.second, "sweep.variable"));
                    else if (sk == "values") s.sweep_values = read<std::vector<double>>(sv.second, "sweep.values");
                    else throw ConfigError("sweep." + sk + ": unknown key");
                }
            } else {
                throw ConfigError(key + ": unknown key");
            }
        }
    }
    positive("users_per_subcarrier", s.l_max);
    positive("users", s.users);
    if (s.streaming_users > s.users) throw ConfigError("streaming_users: cannot exceed users");
    positive("arrival_rate", s.arrival_rate);
    positive("queue_length", s.queue_length);
    positive("packet_bits", s.packet_bits);
    positive("subcarriers", s.subcarriers);
    positive("bandwidth_hz", s.bandwidth_hz);
    positive("coverage_diameter_m", s.coverage_diameter_m);
    positive("xi", s.xi);
    positive("draws", s.draws);
    if (s.spectral_mask_w) positive("spectral_mask_w", *s.spectral_mask_w);
    if (s.sweep != SweepVariable::None && s.sweep_values.empty())
        throw ConfigError("sweep.values: a sweep variable needs at least one value");
    if (s.architecture == Architecture::HPN1 && s.low_power_nodes && *s.low_power_nodes != 0)
        throw ConfigError("low_power_nodes: the hpn1 architecture has no low-power nodes");
    if (s.low_power_node_count() == 0 && s.architecture == Architecture::CRAN)
        throw ConfigError("low_power_nodes: cran needs at least one node");

    LoadedConfig out{s, build_network(s, s.seed)};
    return out;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

TinyInstance tiny_instance(std::uint64_t seed) {
    std::mt19937_64 rng(splitmix(seed ^ 0x7175ULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> chi(1.0);
    const std::size_t M = 1 + rng() % 2, K = 2 + rng() % 2, N = 1 + rng() % 2;
    TinyInstance t;
    for (std::size_t m = 0; m < M; ++m)
        t.cfg.rrhs.push_back(node(m == 0 ? NodeTier::High : NodeTier::Low, {150.0 * static_cast<double>(m), 0.0},
                                  m == 0 ? 1.0 : 0.25, 2.0, 0.1, 0.5));
    for (std::size_t k = 0; k < K; ++k) {
        UserSpec u;
        const double r = 10.0 + 140.0 * std::sqrt(unit(rng));
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        u.position = {r * std::cos(theta), r * std::sin(theta)};
        t.cfg.users.push_back(u);
    }
    if (rng() % 2 == 0) {
        t.cfg.users[0].kind = TrafficKind::Streaming;
        t.cfg.users[0].traffic = TrafficSpec::from_queue(25.0, 10.0, 1024.0);
    }
    t.cfg.n_subcarriers = N;
    t.cfg.subcarrier_bw = 15e3;
    t.cfg.l_max = 3;
    t.cfg.apply_defaults();
    t.cfg.validate();
    t.ch = ChannelState{Tensor3(M, K, N), Tensor3(M, K, N, 1e-10)};
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k) {
            const double d = std::hypot(t.cfg.rrhs[m].position.x - t.cfg.users[k].position.x,
                                        t.cfg.rrhs[m].position.y - t.cfg.users[k].position.y);
            for (std::size_t n = 0; n < N; ++n) t.ch.gamma(m, k, n) = chi(rng) * std::pow(std::max(d, 1.0), -3.0);
        }
    return t;
}

GapOutcome compare_on_tiny(std::uint64_t seed, const PolyblockOptions& opts) {
    const TinyInstance t = tiny_instance(seed);
    GapOutcome g;
    g.rrhs = t.cfg.num_rrhs();
    g.users = t.cfg.num_users();
    g.subcarriers = t.cfg.n_subcarriers;
    g.dimension = CanonicalProblem(t.ch, t.cfg, 0.0).dimension();
    const auto psi = streaming_min_rates(t.cfg);
    auto feasible = [&](const PowerAllocation& a) {
        if (!check_feasibility(a, t.ch, t.cfg, psi).feasible()) return false;
        for (const auto& d : validate_delay(a, t.ch, t.cfg))
            if (!d.pass) return false;
        return true;
    };
    auto since = [](std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    };

    auto t0 = std::chrono::steady_clock::now();
    try {
        ScaleSolver scale;
        const DinkelbachTrace tr = solve(t.ch, t.cfg, scale);
        g.scale_ee = energy_efficiency(tr.final, t.ch, t.cfg).ee_E;
        g.scale_feasible = feasible(tr.final);
    } catch (const ProblemInfeasible& e) {
        g.note = std::string("scale: ") + e.what();
    }
    g.scale_ms = since(t0);

    t0 = std::chrono::steady_clock::now();
    try {
        PolyblockSolver poly(opts);
        const DinkelbachTrace tr = solve(t.ch, t.cfg, poly);
        const EnergyReport e = energy_efficiency(tr.final, t.ch, t.cfg);
        g.polyblock_ee = e.ee_E;
        g.polyblock_feasible = feasible(tr.final);
        g.certified = !tr.cap_hit;
        double eps = 0.0;
        for (const auto& h : poly.history()) {
            eps = std::max(eps, h.epsilon);
            g.certified = g.certified && h.status == PolyblockStatus::Converged;
        }
        g.epsilon_ee = e.total_power_P > 0.0 ? eps / e.total_power_P : 0.0;
    } catch (const std::exception& e) {
        g.note += std::string(g.note.empty() ? "" : "; ") + "polyblock: " + e.what();
    }
    g.polyblock_ms = since(t0);
    return g;
}

namespace {

std::unique_ptr<InnerSolver> make_solver(SolverKind kind) {
    if (kind == SolverKind::Polyblock) return std::make_unique<PolyblockSolver>();
    return std::make_unique<ScaleSolver>();
}

}  // namespace

DrawOutcome solve_draw(const Scenario& s, std::uint64_t draw_seed) {
    DrawOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const NetworkConfig cfg = build_network(s, draw_seed);
        const ChannelState ch = gen_channel(cfg, draw_seed, noise_per_subcarrier(s));
        auto solver = make_solver(s.solver);
        const DinkelbachTrace trace = solve(ch, cfg, *solver);
        const EnergyReport e = energy_efficiency(trace.final, ch, cfg);
        out.ee = e.ee_E;
        out.sum_rate = e.sum_rate_R;
        out.power = e.total_power_P;
        out.iterations = static_cast<int>(trace.iterations.size());
        const auto psi = streaming_min_rates(cfg);
        const FeasibilityReport rep = check_feasibility(trace.final, ch, cfg, psi);
        bool delay_ok = true;
        for (const auto& d : validate_delay(trace.final, ch, cfg)) delay_ok = delay_ok && d.pass;
        if (!rep.feasible() || !delay_ok) {
            out.flagged = true;
            out.note = rep.feasible() ? "delay bound violated" : "constraint " + to_string(rep.violations[0].constraint);
        }
    } catch (const ProblemInfeasible& e) {
        out.flagged = true;
        out.note = e.what();
    }
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::vector<SweepRow> run_sweep(const Scenario& s, const SweepOptions& opts) {
    std::vector<double> values = s.sweep_values;
    if (s.sweep == SweepVariable::None || values.empty()) values = {0.0};
    const std::size_t draws = s.draws;
    std::vector<DrawOutcome> outcomes(values.size() * draws);
    const auto tasks = static_cast<std::ptrdiff_t>(outcomes.size());
    const int workers = std::max(opts.workers, 1);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1) if (workers > 1)
    for (std::ptrdiff_t t = 0; t < tasks; ++t) {
        const std::size_t vi = static_cast<std::size_t>(t) / draws, d = static_cast<std::size_t>(t) % draws;
        outcomes[static_cast<std::size_t>(t)] = solve_draw(s.at(values[vi]), s.seed + d);
    }

    std::vector<SweepRow> rows;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        SweepRow row;
        row.value = values[vi];
        std::size_t used = 0;
        for (std::size_t d = 0; d < draws; ++d) {
            const DrawOutcome& o = outcomes[vi * draws + d];
            row.wall_ms += o.wall_ms;
            if (o.flagged) {
                ++row.flagged;
                continue;
            }
            ++used;
            row.ee += o.ee;
            row.sum_rate += o.sum_rate;
            row.power += o.power;
            row.iterations += o.iterations;
        }
        if (used > 0) {
            const double u = static_cast<double>(used);
            row.ee /= u;
            row.sum_rate /= u;
            row.power /= u;
            row.iterations /= u;
        }
        row.wall_ms = opts.timing ? row.wall_ms / static_cast<double>(draws) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::string git_revision() { return HCRAN_GIT_REV; }

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void write_sweep_csv(std::ostream& os, const Scenario& s, const std::vector<SweepRow>& rows) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(s.canonical())));
    os << "# config_hash: " << hash << '\n'
       << "# git_revision: " << git_revision() << '\n'
       << "# architecture: " << to_string(s.architecture) << '\n'
       << "# multiplexing: " << (s.l_max == 1 ? "oma" : "noma") << " (l_max=" << s.l_max << ")\n"
       << "# sweep: " << to_string(s.sweep) << '\n'
       << "# draws: " << s.draws << ", seed: " << s.seed << '\n'
       << "value,ee,sum_rate,power,iterations,wall_ms,flagged\n";
    for (const auto& r : rows)
        os << fmt(r.value) << ',' << fmt(r.ee) << ',' << fmt(r.sum_rate) << ',' << fmt(r.power) << ','
           << fmt(r.iterations) << ',' << fmt(r.wall_ms) << ',' << r.flagged << '\n';
}

void write_plot_script(std::ostream& os, const Scenario& s, const std::string& csv_path) {
    os << "# gnuplot script\n"
       << "set datafile separator ','\n"
       << "set datafile commentschars '#'\n"
       << "set key autotitle columnhead\n"
       << "set xlabel '" << to_string(s.sweep) << "'\n"
       << "set ylabel 'elastic energy efficiency (bits/s/Hz/W)'\n"
       << "set grid\n"
       << "set terminal pngcairo size 800,600\n"
       << "set output '" << csv_path << ".png'\n"
       << "plot '" << csv_path << "' using 1:2 with linespoints title '" << to_string(s.architecture)
       << (s.l_max == 1 ? " OMA" : " NOMA") << "'\n";
}

}  // namespace hcran

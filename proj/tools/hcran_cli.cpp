#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hcran/dinkelbach.hpp"
#include "hcran/overhead.hpp"
#include "hcran/parallel.hpp"
#include "hcran/polyblock.hpp"
#include "hcran/scale.hpp"
#include "hcran/scenario.hpp"
#include "hcran/traffic.hpp"

namespace {

using namespace hcran;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int workers = 1;
    std::string solver;
    bool oma = false;
    bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "YAML scenario file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "RNG seed (overrides the config)");
    cmd->add_option("--out", f.out, "output CSV path (stdout when omitted)");
    cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--solver", f.solver, "scale or polyblock")->check(CLI::IsMember({"scale", "polyblock"}));
    cmd->add_flag("--oma", f.oma, "one user per subcarrier");
    cmd->add_flag("--no-timing", f.no_timing, "write zero wall times so outputs are byte-reproducible");
}

Scenario scenario_from(const CommonFlags& f) {
    Scenario s = f.config.empty() ? Scenario{} : load_config(f.config).scenario;
    if (f.seed) s.seed = *f.seed;
    if (!f.solver.empty()) s.solver = parse_solver(f.solver);
    if (f.oma) s.l_max = 1;
    return s;
}

/// Writes to the --out file when given, stdout otherwise.
class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty()) return;
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    std::ostream& stream() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::unique_ptr<InnerSolver> make_inner(SolverKind kind, int workers) {
    if (kind == SolverKind::Polyblock) return std::make_unique<PolyblockSolver>();
    ScaleOptions o;
    o.workers = workers;
    return std::make_unique<ScaleSolver>(o);
}

int run_solve(const CommonFlags& f) {
    const Scenario s = scenario_from(f);
    const NetworkConfig cfg = build_network(s, s.seed);
    const ChannelState ch = gen_channel(cfg, s.seed, noise_per_subcarrier(s));
    auto inner = make_inner(s.solver, f.workers);
    const DinkelbachTrace tr = solve(ch, cfg, *inner);
    const EnergyReport e = energy_efficiency(tr.final, ch, cfg);
    const FeasibilityReport rep = check_feasibility(tr.final, ch, cfg, streaming_min_rates(cfg));

    Output out(f.out);
    std::ostream& os = out.stream();
    os << "iteration,E,surplus,inner_rounds,inner_sweeps,gap\n";
    for (std::size_t i = 0; i < tr.iterations.size(); ++i) {
        const auto& it = tr.iterations[i];
        os << i << ',' << it.E << ',' << it.surplus << ',' << it.inner.rounds << ',' << it.inner.sweeps << ','
           << it.inner.gap << '\n';
    }
    if (const auto* scale = dynamic_cast<const ScaleSolver*>(inner.get()); scale && !f.out.empty()) {
        std::ofstream conv(f.out + ".rounds.csv");
        conv << "phase,round,surrogate,max_violation,step_norm\n";
        for (const auto& r : scale->trace())
            conv << r.phase << ',' << r.round << ',' << r.surrogate << ',' << r.max_violation << ',' << r.step_norm
                 << '\n';
    }
    std::cerr << "ee " << e.ee_E << " bits/Hz/J, sum rate " << e.sum_rate_R << " bits/s/Hz, power "
              << e.total_power_P << " W, " << tr.iterations.size() << " outer iterations"
              << (tr.cap_hit ? " (iteration cap hit)" : "") << ", " << (rep.feasible() ? "feasible" : "INFEASIBLE")
              << '\n';
    return rep.feasible() ? 0 : 2;
}

int run_sweep_cmd(const CommonFlags& f) {
    const Scenario s = scenario_from(f);
    SweepOptions opts;
    opts.workers = f.workers;
    opts.timing = !f.no_timing;
    const auto rows = run_sweep(s, opts);
    Output out(f.out);
    write_sweep_csv(out.stream(), s, rows);
    if (!f.out.empty()) {
        std::ofstream gp(f.out + ".gp");
        write_plot_script(gp, s, f.out);
    }
    return 0;
}

std::vector<std::size_t> parse_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
    return out;
}

int run_bench(const CommonFlags& f, std::size_t rrhs, std::size_t users, const std::string& subcarriers, int reps) {
    std::vector<BenchGridPoint> grid;
    for (std::size_t n : parse_list(subcarriers)) grid.push_back({rrhs, n, users});
    const BenchReport rep = benchmark(grid, reps, f.workers, f.seed.value_or(1));
    Output out(f.out);
    std::ostream& os = out.stream();
    os << "M,N,K,workers,serial_ms,parallel_ms,speedup,max_divergence\n";
    for (const auto& r : rep.rows) {
        const bool t = !f.no_timing;
        os << r.rrhs << ',' << r.subcarriers << ',' << r.users << ',' << r.workers << ',' << (t ? r.serial_ms : 0.0)
           << ',' << (t ? r.parallel_ms : 0.0) << ',' << (t ? r.speedup : 0.0) << ',' << r.max_divergence << '\n';
    }
    return 0;
}

int run_overhead(const CommonFlags& f, std::uint64_t rrhs, std::uint64_t subcarriers, std::uint64_t k_min,
                 std::uint64_t k_max, std::uint64_t rounds) {
    const Scenario s = scenario_from(f);
    Output out(f.out);
    std::ostream& os = out.stream();
    os << "K,centralized_bits,distributed_bits\n";
    for (std::uint64_t k = k_min; k <= k_max; ++k) {
        OverheadInput in;
        in.rrhs = rrhs;
        in.subcarriers = subcarriers;
        in.users = k;
        in.streaming_users = std::min<std::uint64_t>(s.streaming_users, k);
        in.users_per_subcarrier = s.l_max;
        os << k << ',' << count_centralized(in) << ',' << count_distributed(in, rounds) << '\n';
    }
    return 0;
}

int run_gap(const CommonFlags& f, int count, const PolyblockOptions& opts) {
    Output out(f.out);
    std::ostream& os = out.stream();
    os << "instance,M,K,N,dimension,scale_ee,polyblock_ee,ratio,epsilon_ee,certified,scale_ms,polyblock_ms\n";
    const std::uint64_t base = f.seed.value_or(1);
    for (int i = 0; i < count; ++i) {
        const GapOutcome g = compare_on_tiny(base + static_cast<std::uint64_t>(i), opts);
        const bool t = !f.no_timing;
        os << i << ',' << g.rrhs << ',' << g.users << ',' << g.subcarriers << ',' << g.dimension << ',' << g.scale_ee
           << ',' << g.polyblock_ee << ',' << (g.polyblock_ee > 0.0 ? g.scale_ee / g.polyblock_ee : 0.0) << ','
           << g.epsilon_ee << ',' << (g.certified ? 1 : 0) << ',' << (t ? g.scale_ms : 0.0) << ','
           << (t ? g.polyblock_ms : 0.0) << '\n';
        if (!g.note.empty()) std::cerr << "instance " << i << ": " << g.note << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-efficient power allocation for NOMA heterogeneous cloud RAN"};
    app.require_subcommand(1);

    CommonFlags solve_f, sweep_f, bench_f, overhead_f, gap_f;
    auto* solve_cmd = app.add_subcommand("solve", "solve one channel draw and print the outer-loop trace");
    add_common(solve_cmd, solve_f);

    auto* sweep_cmd = app.add_subcommand("sweep", "average over channel draws for every sweep value");
    add_common(sweep_cmd, sweep_f);

    std::size_t bench_rrhs = 10, bench_users = 20;
    std::string bench_n = "64,128,256,512,1024";
    int bench_reps = 5;
    auto* bench_cmd = app.add_subcommand("bench", "time serial and parallel power-update sweeps");
    add_common(bench_cmd, bench_f);
    bench_cmd->add_option("--rrhs", bench_rrhs, "RRHs per instance");
    bench_cmd->add_option("--users", bench_users, "users per instance");
    bench_cmd->add_option("--subcarriers", bench_n, "comma-separated subcarrier counts");
    bench_cmd->add_option("--reps", bench_reps, "repetitions per grid point")->check(CLI::PositiveNumber);

    std::uint64_t oh_rrhs = 3, oh_n = 8, oh_kmin = 4, oh_kmax = 40, oh_rounds = 1;
    auto* overhead_cmd = app.add_subcommand("overhead", "signalling bits versus number of users");
    add_common(overhead_cmd, overhead_f);
    overhead_cmd->add_option("--rrhs", oh_rrhs, "RRHs");
    overhead_cmd->add_option("--subcarriers", oh_n, "subcarriers");
    overhead_cmd->add_option("--k-min", oh_kmin, "smallest user count");
    overhead_cmd->add_option("--k-max", oh_kmax, "largest user count");
    overhead_cmd->add_option("--rounds", oh_rounds, "distributed exchange rounds");

    int gap_count = 20;
    PolyblockOptions gap_opts;
    gap_opts.max_iterations = 5000;
    gap_opts.allow_large = true;
    bool gap_pure = false;
    auto* gap_cmd = app.add_subcommand("gap", "compare SCALE with the polyblock optimum on tiny instances");
    add_common(gap_cmd, gap_f);
    gap_cmd->add_option("--count", gap_count, "number of instances")->check(CLI::PositiveNumber);
    gap_cmd->add_option("--max-iterations", gap_opts.max_iterations, "polyblock iterations per call")
        ->check(CLI::PositiveNumber);
    gap_cmd->add_flag("--pure", gap_pure, "do not seed polyblock incumbents with local solves");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*solve_cmd) return run_solve(solve_f);
        if (*sweep_cmd) return run_sweep_cmd(sweep_f);
        if (*bench_cmd) return run_bench(bench_f, bench_rrhs, bench_users, bench_n, bench_reps);
        if (*overhead_cmd) return run_overhead(overhead_f, oh_rrhs, oh_n, oh_kmin, oh_kmax, oh_rounds);
        if (*gap_cmd) {
            gap_opts.local_incumbent = !gap_pure;
            return run_gap(gap_f, gap_count, gap_opts);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

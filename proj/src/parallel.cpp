#include "hcran/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <thread>

#include "hcran/scale.hpp"

namespace hcran {

SweepPlan SweepPlan::build(std::vector<std::size_t> targets, std::size_t output_size, int workers) {
    if (workers < 1) throw PlanError("workers must be at least 1");
    std::vector<std::uint8_t> seen(output_size, 0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const std::size_t t = targets[i];
        if (t >= output_size)
            throw PlanError("task " + std::to_string(i) + " writes index " + std::to_string(t) +
                            " outside an output of size " + std::to_string(output_size));
        if (seen[t]) throw PlanError("two tasks write output index " + std::to_string(t));
        seen[t] = 1;
    }
    SweepPlan plan;
    plan.targets_ = std::move(targets);
    plan.output_size_ = output_size;
    plan.workers_ = workers;
    return plan;
}

double deterministic_sum(std::span<const double> values, int workers) {
    constexpr std::size_t kBlock = 1024;
    const std::size_t blocks = (values.size() + kBlock - 1) / kBlock;
    if (blocks == 0) return 0.0;
    std::vector<double> partial(blocks, 0.0);
    const auto count = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for num_threads(std::max(workers, 1)) schedule(static) if (workers > 1)
    for (std::ptrdiff_t b = 0; b < count; ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
        const std::size_t hi = std::min(values.size(), lo + kBlock);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += values[i];
        partial[static_cast<std::size_t>(b)] = s;
    }
    for (std::size_t width = 1; width < blocks; width *= 2)
        for (std::size_t i = 0; i + width < blocks; i += 2 * width) partial[i] += partial[i + width];
    return partial[0];
}

int hardware_workers() {
#ifdef _OPENMP
    return std::max(1, omp_get_num_procs());
#else
    return std::max(1u, std::thread::hardware_concurrency());
#endif
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

struct SweepWorkload::State {
    BenchGridPoint size;
    NetworkConfig cfg;
    ChannelState ch;
    Tensor3 p;
    ScaleCoefficients coeffs;
    DualState duals;
    SweepPlan serial, parallel;
};

SweepWorkload::SweepWorkload(const BenchGridPoint& g, unsigned long long seed) : state_(std::make_unique<State>()) {
    State& b = *state_;
    b.size = g;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> place(-250.0, 250.0);
    std::exponential_distribution<double> fading(1.0);
    for (std::size_t m = 0; m < g.rrhs; ++m) {
        RrhSpec r;
        r.position = {place(rng), place(rng)};
        r.p_max = 0.2;
        r.eta = 2.5;
        r.p_circuit = 1.0;
        b.cfg.rrhs.push_back(r);
    }
    for (std::size_t k = 0; k < g.users; ++k) b.cfg.users.push_back({TrafficKind::Elastic, {place(rng), place(rng)}, {}});
    b.cfg.n_subcarriers = g.subcarriers;
    b.cfg.subcarrier_bw = 15e3;
    b.cfg.apply_defaults();
    b.ch.gamma = Tensor3(g.rrhs, g.users, g.subcarriers);
    b.ch.sigma = Tensor3(g.rrhs, g.users, g.subcarriers, 1e-16);
    b.p = Tensor3(g.rrhs, g.users, g.subcarriers);
    for (std::size_t m = 0; m < g.rrhs; ++m)
        for (std::size_t k = 0; k < g.users; ++k) {
            const double dx = b.cfg.rrhs[m].position.x - b.cfg.users[k].position.x;
            const double dy = b.cfg.rrhs[m].position.y - b.cfg.users[k].position.y;
            const double d = std::max(1.0, std::hypot(dx, dy));
            for (std::size_t n = 0; n < g.subcarriers; ++n) {
                b.ch.gamma(m, k, n) = fading(rng) * std::pow(d, -3.0);
                b.p(m, k, n) = b.cfg.p_mask(m, k, n) * 0.5;
            }
        }
    b.coeffs = ScaleCoefficients::high_sir(g.rrhs, g.users, g.subcarriers);
    b.duals = DualState::zeros(g.rrhs, g.users);
    std::vector<std::size_t> targets(b.p.size());
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
    b.serial = SweepPlan::build(targets, targets.size(), 1);
    b.parallel = SweepPlan::build(std::move(targets), b.p.size(), 1);
}

SweepWorkload::~SweepWorkload() = default;
SweepWorkload::SweepWorkload(SweepWorkload&&) noexcept = default;
SweepWorkload& SweepWorkload::operator=(SweepWorkload&&) noexcept = default;

std::size_t SweepWorkload::tasks() const noexcept { return state_->p.size(); }

void SweepWorkload::run(int workers, std::span<double> out) const {
    const State& b = *state_;
    SweepSnapshot::Inputs in{&b.ch, &b.cfg, 1.0, &b.p, nullptr, &b.coeffs, &b.duals, nullptr, 1e-12, workers};
    const SweepSnapshot snap(in);
    const std::size_t K = b.size.users, N = b.size.subcarriers;
    auto fn = [&](std::size_t a) { return snap.update(a / (K * N), (a / N) % K, a % N).power; };
    if (workers <= 1) {
        serial_sweep(b.serial, out, fn);
    } else {
        const SweepPlan plan = SweepPlan::build({b.parallel.targets().begin(), b.parallel.targets().end()},
                                                b.parallel.output_size(), workers);
        parallel_sweep(plan, out, fn);
    }
}

BenchReport benchmark(std::span<const BenchGridPoint> grid, int repetitions, int workers, unsigned long long seed) {
    BenchReport report;
    repetitions = std::max(repetitions, 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const SweepWorkload work(grid[i], seed + i);
        std::vector<double> out_serial(work.tasks()), out_par(work.tasks());
        auto time_runs = [&](int w, std::vector<double>& out) {
            std::vector<double> ms;
            for (int r = 0; r < repetitions; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                work.run(w, out);
                ms.push_back(elapsed_ms(t0));
            }
            std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2), ms.end());
            return ms[ms.size() / 2];
        };
        const double serial_ms = time_runs(1, out_serial);
        const double par_ms = time_runs(workers, out_par);
        double div = 0.0;
        for (std::size_t j = 0; j < out_serial.size(); ++j) div = std::max(div, std::abs(out_serial[j] - out_par[j]));
        const auto& g = grid[i];
        report.rows.push_back({g.rrhs, g.subcarriers, g.users, workers, serial_ms, par_ms,
                               par_ms > 0.0 ? serial_ms / par_ms : 0.0, div});
    }
    return report;
}

}  // namespace hcran

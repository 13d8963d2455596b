#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hcran {

class PlanError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Independent update tasks: task i reads a frozen snapshot and writes only out[targets[i]].
class SweepPlan {
public:
    static SweepPlan build(std::vector<std::size_t> targets, std::size_t output_size, int workers);

    std::span<const std::size_t> targets() const noexcept { return targets_; }
    std::size_t output_size() const noexcept { return output_size_; }
    int workers() const noexcept { return workers_; }
    std::size_t tasks() const noexcept { return targets_.size(); }

private:
    std::vector<std::size_t> targets_;
    std::size_t output_size_ = 0;
    int workers_ = 1;
};

/// Serial reference: runs tasks in index order.
template <class UpdateFn>
void serial_sweep(const SweepPlan& plan, std::span<double> out, UpdateFn&& fn) {
    const auto t = plan.targets();
    for (std::size_t i = 0; i < t.size(); ++i) out[t[i]] = fn(i);
}

template <class UpdateFn>
void parallel_sweep(const SweepPlan& plan, std::span<double> out, UpdateFn&& fn) {
    if (out.size() < plan.output_size()) throw PlanError("output buffer smaller than the plan's output size");
    const auto t = plan.targets();
    const auto count = static_cast<std::ptrdiff_t>(t.size());
    if (plan.workers() <= 1 || count < 2) {
        serial_sweep(plan, out, fn);
        return;
    }
#pragma omp parallel for num_threads(plan.workers()) schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) out[t[static_cast<std::size_t>(i)]] = fn(static_cast<std::size_t>(i));
}

template <class UpdateFn>
std::vector<double> parallel_sweep(const SweepPlan& plan, UpdateFn&& fn) {
    std::vector<double> out(plan.output_size(), 0.0);
    parallel_sweep(plan, std::span<double>(out), fn);
    return out;
}

/// Sum whose rounding does not depend on the worker count: fixed blocks, then a fixed pairwise tree.
double deterministic_sum(std::span<const double> values, int workers);

struct BenchGridPoint {
    std::size_t rrhs = 1, subcarriers = 1, users = 1;
};

/// A random SCALE power-update sweep of a given size, reusable across timing runs.
class SweepWorkload {
public:
    SweepWorkload(const BenchGridPoint& size, unsigned long long seed);
    ~SweepWorkload();
    SweepWorkload(SweepWorkload&&) noexcept;
    SweepWorkload& operator=(SweepWorkload&&) noexcept;

    std::size_t tasks() const noexcept;
    /// Builds the snapshot and runs one sweep; one worker takes the serial reference path.
    void run(int workers, std::span<double> out) const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

struct BenchRow {
    std::size_t rrhs = 0, subcarriers = 0, users = 0;
    int workers = 1;
    double serial_ms = 0.0;
    double parallel_ms = 0.0;
    double speedup = 0.0;
    double max_divergence = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

/// Times one SCALE power-update sweep serially and with `workers` threads on random instances.
BenchReport benchmark(std::span<const BenchGridPoint> grid, int repetitions, int workers, unsigned long long seed);

int hardware_workers();

}  // namespace hcran

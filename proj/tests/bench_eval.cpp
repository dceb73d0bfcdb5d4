// Throughput comparison of serial vs OpenMP-parallel snapshot evaluation.
// Usage: bench_eval [runs] [jobs]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "oodrl/agent.hpp"
#include "oodrl/eval.hpp"

using namespace oodrl;

int main(int argc, char** argv) {
    const int runs = argc > 1 ? std::atoi(argv[1]) : 60;
    const int jobs = argc > 2 ? std::atoi(argv[2]) : 4;

    const GridSpec spec = make_env(Variant::train);
    ModelHyper hyper;
    hyper.kind = ModelKind::bootp;
    TrainConfig cfg;
    cfg.episodes = 50;
    cfg.warmup_transitions = 100;
    cfg.snapshot_interval = 50;
    cfg.seed = 123;
    std::printf("training a small bootp model (%d episodes)...\n", cfg.episodes);
    const TrainResult trained = train(cfg, hyper, spec);
    const Snapshot& snap = trained.snapshots.back();

    auto time_it = [&](auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto traces = fn();
        const auto t1 = std::chrono::steady_clock::now();
        long long steps = 0;
        for (const auto& trace : traces) steps += static_cast<long long>(trace.steps.size());
        const double seconds = std::chrono::duration<double>(t1 - t0).count();
        return std::pair<double, long long>{seconds, steps};
    };

    const auto [serial_s, serial_steps] =
        time_it([&] { return run_evaluation(snap, spec, Variant::train, runs, 777); });
    const auto [parallel_s, parallel_steps] = time_it(
        [&] { return run_evaluation_parallel(snap, spec, Variant::train, runs, 777, jobs); });

    std::printf("serial:   %d runs, %lld steps, %.3f s (%.1f steps/s)\n", runs, serial_steps,
                serial_s, serial_steps / serial_s);
    std::printf("parallel: %d runs, %lld steps, %.3f s (%.1f steps/s) with %d jobs\n", runs,
                parallel_steps, parallel_s, parallel_steps / parallel_s, jobs);
    std::printf("speedup:  %.2fx\n", serial_s / parallel_s);
    if (serial_steps != parallel_steps) {
        std::printf("ERROR: step counts differ between serial and parallel\n");
        return 1;
    }
    return 0;
}

// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Benchmark helpers: median wall-clock timing over warm repetitions, and
// peak-RSS measurement of a child process so allocator reuse in the parent
// cannot mask a renderer's real memory footprint.

#ifndef DOFSIM_BENCH_HPP
#define DOFSIM_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include <sys/resource.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "dofsim/error.hpp"

namespace dofsim {

struct BenchResult {
    double median_ms = 0.0;
    std::vector<double> times_ms;
};

/// Runs `fn` for `warmup` unmeasured plus `reps` measured repetitions and
/// reports the median, which is robust to scheduler noise on a shared core.
template <typename F>
inline BenchResult bench_median(F&& fn, int reps = 10, int warmup = 2) {
    require(reps >= 1, ErrorCode::InvalidArgument, "reps must be positive");
    using clock = std::chrono::steady_clock;
    for (int i = 0; i < warmup; ++i)
        fn();
    BenchResult r;
    r.times_ms.reserve(static_cast<size_t>(reps));
    for (int i = 0; i < reps; ++i) {
        const auto t0 = clock::now();
        fn();
        const auto t1 = clock::now();
        r.times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::vector<double> sorted = r.times_ms;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    r.median_ms = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return r;
}

struct ChildRun {
    int exit_code = -1;
    long long peak_rss_kb = 0;
};

/// Runs argv[0] with the given arguments in a child process and returns its
/// exit code and peak resident set size in kilobytes (from wait4 rusage).
inline ChildRun run_child_measured(const std::vector<std::string>& argv) {
    require(!argv.empty(), ErrorCode::InvalidArgument, "argv must not be empty");
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const std::string& a : argv)
        cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    const pid_t pid = fork();
    require(pid >= 0, ErrorCode::IoError, "fork failed");
    if (pid == 0) {
        execv(cargv[0], cargv.data());
        _exit(127);  // exec failed
    }
    int status = 0;
    struct rusage ru {};
    const pid_t waited = wait4(pid, &status, 0, &ru);
    require(waited == pid, ErrorCode::IoError, "wait4 failed");
    ChildRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.peak_rss_kb = static_cast<long long>(ru.ru_maxrss);
    return r;
}

}  // namespace dofsim

#endif  // DOFSIM_BENCH_HPP

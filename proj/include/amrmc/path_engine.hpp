#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrmc/parallel.hpp"
#include "amrmc/rng.hpp"

namespace amrmc {

/// Exercise dates 0 = t_0 < t_1 < ... < t_m plus the fixed initial state S(0).
struct ExerciseGrid {
    std::vector<double> times;  // t_1 .. t_m, strictly increasing, all > 0
    double t0_state = 0.0;

    std::size_t m() const { return times.size(); }

    void validate() const {
        if (times.empty()) throw std::invalid_argument("ExerciseGrid: needs at least one date");
        double prev = 0.0;
        for (double t : times) {
            if (!(t > prev))
                throw std::invalid_argument("ExerciseGrid: dates must be strictly increasing and positive");
            prev = t;
        }
    }
};

enum class ProcessKind {
    StandardBrownian,
    // S(t) = exp(W(t) - t/2) exactly; no other drift/volatility parameterization.
    DriftAdjustedGeometricBrownian,
};

inline std::string to_string(ProcessKind p) {
    return p == ProcessKind::StandardBrownian ? "brownian" : "geometric";
}

/// N simulated state rows at the grid dates. Row i, column n holds S^(i)(t_n).
/// Immutable once built; safe to share read-only across threads.
struct PathBatch {
    ProcessKind process = ProcessKind::StandardBrownian;
    ExerciseGrid grid;
    std::size_t n_paths = 0;
    std::vector<double> states;  // row-major, n_paths x m
    SeedCoordinates seed;
    std::string generator;  // variate-generation method name

    double at(std::size_t path, std::size_t date) const {
        return states[path * grid.m() + date];
    }
    std::span<const double> row(std::size_t path) const {
        return {states.data() + path * grid.m(), grid.m()};
    }
};

namespace detail {

/// Fills one path row: independent normal increments with variance
/// t_{n+1} - t_n, exponentiated with the -t/2 drift adjustment for the
/// geometric case. Each row has its own sub-stream, so any subset of rows
/// is reproducible and generation order does not matter.
inline void generate_row(ProcessKind process, std::span<const double> times,
                         double t0_state, PhiloxStream& stream, std::span<double> out) {
    double w = 0.0;
    double prev_t = 0.0;
    for (std::size_t n = 0; n < times.size(); ++n) {
        w += std::sqrt(times[n] - prev_t) * stream.next_normal();
        prev_t = times[n];
        out[n] = process == ProcessKind::StandardBrownian
                     ? t0_state + w
                     : std::exp(w - 0.5 * times[n]);
    }
}

}  // namespace detail

/// Generates n_paths rows at the grid dates. Row i uses the sub-stream
/// (seed.base_seed, seed.labels + [i]); chunked parallel generation yields
/// the same matrix as sequential generation.
inline PathBatch sample_paths(ProcessKind process, const ExerciseGrid& grid,
                              std::size_t n_paths, const SeedCoordinates& seed,
                              int threads = 1) {
    grid.validate();
    if (process == ProcessKind::DriftAdjustedGeometricBrownian && grid.t0_state != 1.0)
        throw std::invalid_argument(
            "sample_paths: geometric process fixes S(0) = exp(W(0) - 0) = 1");

    PathBatch batch;
    batch.process = process;
    batch.grid = grid;
    batch.n_paths = n_paths;
    batch.seed = seed;
    batch.generator = std::string(kGeneratorName);
    batch.states.resize(n_paths * grid.m());

    const std::size_t m = grid.m();
    constexpr std::size_t kChunk = 8192;
    const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;
    parallel_for(n_chunks, threads, [&](std::size_t c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(lo + kChunk, n_paths);
        std::vector<std::uint64_t> labels = seed.labels;
        labels.push_back(0);
        for (std::size_t i = lo; i < hi; ++i) {
            labels.back() = i;
            PhiloxStream stream(seed.base_seed, labels);
            detail::generate_row(process, grid.times, grid.t0_state, stream,
                                 {batch.states.data() + i * m, m});
        }
    });
    return batch;
}

}  // namespace amrmc

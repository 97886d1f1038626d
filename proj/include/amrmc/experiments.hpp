#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "amrmc/moments.hpp"
#include "amrmc/parallel.hpp"
#include "amrmc/path_engine.hpp"
#include "amrmc/regression.hpp"

namespace amrmc {

enum class MseMethod { Direct, Scaled };

inline std::string to_string(MseMethod m) {
    return m == MseMethod::Direct ? "direct" : "scaled";
}

/// One (K, N) cell of a convergence sweep.
struct MseCell {
    int K = 0;
    std::size_t N = 0;
    std::size_t batches = 0;
    MseMethod method = MseMethod::Direct;
    bool available = true;
    double mse_mean = std::numeric_limits<double>::quiet_NaN();
    double mse_stderr = std::numeric_limits<double>::quiet_NaN();
    double mse_median = std::numeric_limits<double>::quiet_NaN();
    double expected_mse = std::numeric_limits<double>::quiet_NaN();
    double critical_k_lower = std::numeric_limits<double>::quiet_NaN();
    double critical_k_upper = std::numeric_limits<double>::quiet_NaN();
    std::string regime;  // subcritical | supercritical | band | unavailable
};

struct SweepGrid {
    Setting setting = Setting::Normal;
    std::vector<int> k_values;
    std::vector<std::size_t> n_values;
    std::size_t batches = 5000;
    double t1 = 1.0;
    double t2 = 2.0;
    std::uint64_t base_seed = 0;
    int scaled_threshold = 7;     // K at and above which the scaled method applies
    std::size_t n_ref = 500000;   // replication size for the scaled method
    int threads = 0;

    void validate() const {
        if (k_values.empty() || n_values.empty())
            throw std::invalid_argument("SweepGrid: empty K or N axis");
        for (int k : k_values)
            if (k < 0) throw std::invalid_argument("SweepGrid: K must be >= 0");
        for (std::size_t n : n_values)
            if (n < 2) throw std::invalid_argument("SweepGrid: N must be >= 2");
        if (batches < 2) throw std::invalid_argument("SweepGrid: standard error needs batches >= 2");
        if (!(t1 > 0.0 && t2 >= t1)) throw std::invalid_argument("SweepGrid: need 0 < t1 <= t2");
        const bool any_scaled =
            std::any_of(k_values.begin(), k_values.end(),
                        [&](int k) { return k >= scaled_threshold; });
        if (any_scaled && n_ref < *std::max_element(n_values.begin(), n_values.end()))
            throw std::invalid_argument("SweepGrid: n_ref must be >= max(N) when the scaled method applies");
    }
};

struct SweepResult {
    SweepGrid grid;
    std::vector<MseCell> cells;  // row-major over (k_values x n_values)
};

/// The worst-case single-period target: Y* concentrated on the top basis
/// index, normalized so |beta| = 1. Normal setting: a_K = rho^{K/2} with the
/// Hermite basis; lognormal: a_K = 1 with the exponential-martingale basis.
inline SinglePeriodTarget worst_case_target(Setting setting, int K, double t1, double t2) {
    if (K < 0) throw std::invalid_argument("worst_case_target: order must be >= 0");
    std::vector<double> a(static_cast<std::size_t>(K) + 1, 0.0);
    if (setting == Setting::Normal) {
        a[K] = std::pow(t2 / t1, 0.5 * K);
        return make_single_period_target({BasisFamily::HermiteNormalized, K}, t1, t2,
                                         std::move(a));
    }
    a[K] = 1.0;
    return make_single_period_target({BasisFamily::ExponentialMartingale, K}, t1, t2,
                                     std::move(a));
}

namespace detail {

/// One single-period regression batch: N fresh paths, gamma estimated in a
/// fixed row order, beta through the exact Gram inverse. Returns |beta - beta*|^2.
inline double single_period_batch_sq_error(const SinglePeriodTarget& target,
                                           std::size_t n_paths,
                                           const GramAnalysis& gram,
                                           const SeedCoordinates& seed) {
    const ProcessKind process = target.basis.family == BasisFamily::HermiteNormalized
                                    ? ProcessKind::StandardBrownian
                                    : ProcessKind::DriftAdjustedGeometricBrownian;
    const double t0_state = process == ProcessKind::StandardBrownian ? 0.0 : 1.0;
    const double times[2] = {target.t1, target.t2};
    const std::size_t width = target.a.size();
    std::vector<double> gamma(width, 0.0);
    std::vector<double> psi1(width), psi2(width);
    std::vector<std::uint64_t> labels = seed.labels;
    labels.push_back(0);
    double states[2];
    for (std::size_t i = 0; i < n_paths; ++i) {
        labels.back() = i;
        PhiloxStream stream(seed.base_seed, labels);
        generate_row(process, times, t0_state, stream, states);
        eval_basis(target.basis, target.t1, states[0], psi1);
        eval_basis(target.basis, target.t2, states[1], psi2);
        double y = 0.0;
        for (std::size_t k = 0; k < width; ++k) y += target.a[k] * psi2[k];
        for (std::size_t k = 0; k < width; ++k) gamma[k] += y * psi1[k];
    }
    const double dn = static_cast<double>(n_paths);
    double err = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
        double b = 0.0;
        for (std::size_t k = 0; k < width; ++k)
            b += gram.inverse[i * width + k] * gamma[k];
        b /= dn;
        const double d = b - target.true_beta[i];
        err += d * d;
    }
    return err;
}

}  // namespace detail

/// MSE estimate over independent batches. Direct method: `batches` runs of N
/// paths each. Scaled method: runs at n_ref, scaled by n_ref/N — exact
/// because the MSE is proportional to 1/N. Per-batch sub-streams come from
/// (seed, batch index), so each cell reproduces bit-exactly in isolation and
/// independently of worker count.
inline MseCell estimate_mse_cell(const SinglePeriodTarget& target, std::size_t n_paths,
                                 std::size_t batches, MseMethod method,
                                 const SeedCoordinates& seed, std::size_t n_ref = 500000,
                                 int threads = 0) {
    if (batches < 2) throw std::invalid_argument("estimate_mse_cell: need batches >= 2");
    MseCell cell;
    cell.K = target.basis.order;
    cell.N = n_paths;
    cell.batches = batches;
    cell.method = method;

    const GramAnalysis gram = gram_analysis(target.basis, target.t1);
    const double rho = target.t2 / target.t1;
    if (target.basis.family == BasisFamily::HermiteNormalized) {
        cell.expected_mse =
            expected_mse_closed_form_normal(cell.K, static_cast<double>(n_paths), rho);
    } else if (gram.inverse_available) {
        cell.expected_mse = expected_mse_closed_form_lognormal(
            cell.K, static_cast<double>(n_paths), target.t1, target.t2);
    }
    if (!gram.inverse_available) {
        cell.available = false;
        cell.regime = "unavailable";
        return cell;
    }

    const std::size_t run_n = method == MseMethod::Scaled ? n_ref : n_paths;
    const double scale = method == MseMethod::Scaled
                             ? static_cast<double>(n_ref) / static_cast<double>(n_paths)
                             : 1.0;
    std::vector<double> sq_errors(batches, 0.0);
    parallel_for(batches, threads, [&](std::size_t b) {
        sq_errors[b] =
            detail::single_period_batch_sq_error(target, run_n, gram, seed.with(b));
    });
    double mean = 0.0;
    for (double e : sq_errors) mean += e;
    mean /= static_cast<double>(batches);
    double var = 0.0;
    for (double e : sq_errors) var += (e - mean) * (e - mean);
    var /= static_cast<double>(batches - 1);
    std::vector<double> sorted = sq_errors;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = batches / 2;
    const double median =
        batches % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    cell.mse_mean = scale * mean;
    cell.mse_stderr = scale * std::sqrt(var / static_cast<double>(batches));
    cell.mse_median = scale * median;
    return cell;
}

/// Runs every (K, N) cell with seeds derived from (base_seed, K, N) and
/// classifies each against the critical curve: subcritical below K_lower,
/// supercritical above K_upper, band between (empty band in the normal
/// setting). Gram refusals mark cells unavailable rather than aborting.
inline SweepResult run_sweep(const SweepGrid& grid) {
    grid.validate();
    SweepResult result;
    result.grid = grid;
    CurveParams params;
    CurveSetting curve_setting;
    if (grid.setting == Setting::Normal) {
        curve_setting = CurveSetting::NormalSingle;
        params.rho = grid.t2 / grid.t1;
    } else {
        curve_setting = CurveSetting::LognormalSingle;
        params.t1 = grid.t1;
        params.t2 = grid.t2;
    }
    for (int k : grid.k_values) {
        const SinglePeriodTarget target = worst_case_target(grid.setting, k, grid.t1, grid.t2);
        for (std::size_t n : grid.n_values) {
            const MseMethod method =
                k >= grid.scaled_threshold ? MseMethod::Scaled : MseMethod::Direct;
            SeedCoordinates cell_seed{grid.base_seed,
                                      {static_cast<std::uint64_t>(k), n}};
            MseCell cell = estimate_mse_cell(target, n, grid.batches, method, cell_seed,
                                             grid.n_ref, grid.threads);
            if (cell.available) {
                const CriticalCurve curve =
                    critical_curve(curve_setting, params, static_cast<double>(n));
                cell.critical_k_lower = curve.k_lower;
                cell.critical_k_upper = curve.k_upper;
                if (static_cast<double>(k) < curve.k_lower)
                    cell.regime = "subcritical";
                else if (static_cast<double>(k) > curve.k_upper)
                    cell.regime = "supercritical";
                else
                    cell.regime = "band";
            }
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

/// Weighted L2 distance between two basis combinations at date t:
/// sqrt((b - c)^T Psi(t) (b - c)), with the exact Gram matrix.
inline double continuation_error_norm(std::span<const double> estimated,
                                      std::span<const double> reference,
                                      const BasisSpec& basis, double t) {
    if (estimated.size() != reference.size())
        throw std::invalid_argument("continuation_error_norm: coefficient length mismatch");
    if (estimated.size() != static_cast<std::size_t>(basis.size()))
        throw std::invalid_argument("continuation_error_norm: basis order mismatch");
    const GramAnalysis gram = gram_analysis(basis, t);
    const std::size_t n = estimated.size();
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double di = estimated[i] - reference[i];
        for (std::size_t j = 0; j < n; ++j)
            quad += di * gram.matrix[i * n + j] * (estimated[j] - reference[j]);
    }
    return std::sqrt(std::max(quad, 0.0));
}

struct DateErrorEstimate {
    std::size_t date = 0;  // n = 1 .. m-1
    double t = 0.0;
    double err_mean = 0.0;    // estimate of E ||C_n_hat - C_n||_n^2
    double err_stderr = 0.0;
    double log_bound = 0.0;   // Theorem 3 leading term (asymptotic)
};

struct MultiperiodStudy {
    std::vector<DateErrorEstimate> per_date;
    CoefficientSet reference;
    std::size_t n_ref = 0;
    std::size_t replications = 0;
};

/// Estimates the per-date continuation error E ||C_n_hat - C_n||_n^2 by
/// measuring replicated pricer runs at N against one high-N reference run
/// (the practical surrogate for the exactly-projected C_n), and reports the
/// Theorem 3 leading term alongside.
inline MultiperiodStudy multiperiod_error_study(ProcessKind process, const ExerciseGrid& grid,
                                                const PayoffSpec& payoff,
                                                const BasisSpec& basis, std::size_t n_paths,
                                                std::size_t replications,
                                                const SeedCoordinates& seed,
                                                std::size_t n_ref_multiplier = 100,
                                                int threads = 0) {
    if (replications < 2)
        throw std::invalid_argument("multiperiod_error_study: need replications >= 2");
    grid.validate();
    const std::size_t m = grid.m();
    if (m < 2) throw std::invalid_argument("multiperiod_error_study: need m >= 2");

    MultiperiodStudy study;
    study.n_ref = n_paths * n_ref_multiplier;
    study.replications = replications;
    study.reference = price_bermudan(process, grid, payoff, basis, study.n_ref,
                                     seed.with(0), {false, threads});

    std::vector<std::vector<double>> sq(m - 1, std::vector<double>(replications, 0.0));
    parallel_for(replications, threads, [&](std::size_t r) {
        const CoefficientSet run = price_bermudan(process, grid, payoff, basis, n_paths,
                                                  seed.with(1).with(r), {false, 1});
        for (std::size_t n = 1; n < m; ++n) {
            const double d = continuation_error_norm(run.betas[n - 1],
                                                     study.reference.betas[n - 1], basis,
                                                     grid.times[n - 1]);
            sq[n - 1][r] = d * d;
        }
    });

    // c = max consecutive exercise-date ratio t_{n+1}/t_n, n = 1..m-1
    double c = 1.0;
    for (std::size_t n = 0; n + 1 < m; ++n)
        c = std::max(c, grid.times[n + 1] / grid.times[n]);
    const Setting setting = basis.family == BasisFamily::HermiteNormalized
                                ? Setting::Normal
                                : Setting::Lognormal;
    for (std::size_t n = 1; n < m; ++n) {
        DateErrorEstimate e;
        e.date = n;
        e.t = grid.times[n - 1];
        double mean = 0.0;
        for (double v : sq[n - 1]) mean += v;
        mean /= static_cast<double>(replications);
        double var = 0.0;
        for (double v : sq[n - 1]) var += (v - mean) * (v - mean);
        var /= static_cast<double>(replications - 1);
        e.err_mean = mean;
        e.err_stderr = std::sqrt(var / static_cast<double>(replications));
        e.log_bound = theorem3_bound(setting, static_cast<int>(m), static_cast<int>(n),
                                     basis.order, static_cast<double>(n_paths), c,
                                     grid.times[m - 1])
                          .log_upper;
        study.per_date.push_back(e);
    }
    return study;
}

}  // namespace amrmc

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrmc/basis.hpp"
#include "amrmc/moments.hpp"
#include "amrmc/parallel.hpp"
#include "amrmc/path_engine.hpp"

namespace amrmc {

enum class PayoffKind { Call, Put, Identity, LinearBasisCombination };

inline std::string to_string(PayoffKind k) {
    switch (k) {
        case PayoffKind::Call: return "call";
        case PayoffKind::Put: return "put";
        case PayoffKind::Identity: return "identity";
        case PayoffKind::LinearBasisCombination: return "combo";
    }
    return "?";
}

/// Exercise payoff h_n. Call/Put/Identity apply the same function at every
/// applicable date; LinearBasisCombination supplies per-date basis
/// coefficients (empty sequence at a date means h_n = 0 there; date 0 must
/// be empty since the basis is undefined at t = 0).
struct PayoffSpec {
    PayoffKind kind = PayoffKind::Put;
    double strike = 0.0;
    std::vector<std::vector<double>> combo;  // per date 0..m
    std::vector<std::uint8_t> applicable;    // per date 0..m; empty = all dates

    bool applies(std::size_t date) const {
        return applicable.empty() || (date < applicable.size() && applicable[date] != 0);
    }

    double value(std::size_t date, double t, double state, const BasisSpec& basis) const {
        if (!applies(date)) return 0.0;
        switch (kind) {
            case PayoffKind::Call: return std::max(state - strike, 0.0);
            case PayoffKind::Put: return std::max(strike - state, 0.0);
            case PayoffKind::Identity: return state;
            case PayoffKind::LinearBasisCombination: {
                if (date >= combo.size() || combo[date].empty()) return 0.0;
                const std::vector<double> psi = eval_basis(
                    {basis.family, static_cast<int>(combo[date].size()) - 1}, t, state);
                double s = 0.0;
                for (std::size_t k = 0; k < combo[date].size(); ++k)
                    s += combo[date][k] * psi[k];
                return s;
            }
        }
        return 0.0;
    }
};

/// Result of the backward-induction pricer: per-date coefficient vectors
/// beta_n for n = 1..m-1, plus V_0 and C_0 and the reproducibility metadata.
struct CoefficientSet {
    std::vector<std::vector<double>> betas;  // betas[n-1] holds date n, n = 1..m-1
    double value_estimate = 0.0;             // V_0 = max(h_0(S(0)), C_0)
    double continuation_estimate = 0.0;      // C_0
    std::vector<std::size_t> sample_sizes;   // per regression date, then the final average
    SeedCoordinates seed;
    ProcessKind process = ProcessKind::StandardBrownian;
    BasisSpec basis;
    std::vector<double> dates;
    std::string generator;
};

/// A single-period regression target Y = sum_k a_k psi_{2k}(S_2) together
/// with the implied coefficient vector at t_1: beta_k = a_k rho^{-k/2} for
/// normalized Hermite, beta_k = a_k for the exponential-martingale family.
struct SinglePeriodTarget {
    BasisSpec basis;
    double t1 = 0.0, t2 = 0.0;
    std::vector<double> a;
    std::vector<double> true_beta;
};

inline SinglePeriodTarget make_single_period_target(const BasisSpec& basis, double t1,
                                                    double t2,
                                                    std::vector<double> coefficients) {
    basis.validate();
    if (!(t1 > 0.0 && t2 >= t1))
        throw std::invalid_argument("make_single_period_target: need 0 < t1 <= t2");
    if (coefficients.size() != static_cast<std::size_t>(basis.size()))
        throw std::invalid_argument("make_single_period_target: coefficient length mismatch");
    SinglePeriodTarget target;
    target.basis = basis;
    target.t1 = t1;
    target.t2 = t2;
    target.a = std::move(coefficients);
    target.true_beta.resize(target.a.size());
    const double rho = t2 / t1;
    for (std::size_t k = 0; k < target.a.size(); ++k)
        target.true_beta[k] = basis.family == BasisFamily::HermiteNormalized
                                  ? target.a[k] * std::pow(rho, -0.5 * static_cast<double>(k))
                                  : target.a[k];
    return target;
}

/// Quasi-regression projection: gamma_k = (1/N) sum_i Y_i psi_k(S_i), then
/// beta = Psi^{-1} gamma using the exact Gram matrix, never the sample one.
/// The accumulation runs over fixed-size chunks reduced in index order, so
/// the result is identical for any worker count.
inline std::vector<double> project(std::span<const double> y_values,
                                   const std::vector<double>& basis_values,
                                   const GramAnalysis& gram, int threads = 1) {
    const std::size_t n_rows = y_values.size();
    const std::size_t width = static_cast<std::size_t>(gram.basis.size());
    if (n_rows < 1) throw std::invalid_argument("project: need at least one row");
    if (basis_values.size() != n_rows * width)
        throw std::invalid_argument("project: basis matrix dimension mismatch");
    if (!gram.inverse_available)
        throw GramConditioningError("project: Gram inverse unavailable");

    constexpr std::size_t kChunk = 8192;
    const std::size_t n_chunks = (n_rows + kChunk - 1) / kChunk;
    std::vector<double> partials(n_chunks * width, 0.0);
    parallel_for(n_chunks, threads, [&](std::size_t c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(lo + kChunk, n_rows);
        double* acc = partials.data() + c * width;
        for (std::size_t i = lo; i < hi; ++i) {
            const double yi = y_values[i];
            const double* row = basis_values.data() + i * width;
            for (std::size_t k = 0; k < width; ++k) acc[k] += yi * row[k];
        }
    });
    std::vector<double> gamma(width, 0.0);
    for (std::size_t c = 0; c < n_chunks; ++c)
        for (std::size_t k = 0; k < width; ++k) gamma[k] += partials[c * width + k];
    for (double& g : gamma) g /= static_cast<double>(n_rows);

    std::vector<double> beta(width, 0.0);
    for (std::size_t i = 0; i < width; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < width; ++k) s += gram.inverse[i * width + k] * gamma[k];
        beta[i] = s;
    }
    return beta;
}

/// C_n(x) = sum_k beta_k psi_k(x) at each state.
inline std::vector<double> continuation_eval(std::span<const double> coefficients,
                                             const BasisSpec& basis, double t,
                                             std::span<const double> states) {
    if (coefficients.size() != static_cast<std::size_t>(basis.size()))
        throw std::invalid_argument("continuation_eval: coefficient length mismatch");
    std::vector<double> out(states.size());
    std::vector<double> psi(basis.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        eval_basis(basis, t, states[i], psi);
        double s = 0.0;
        for (std::size_t k = 0; k < psi.size(); ++k) s += coefficients[k] * psi[k];
        out[i] = s;
    }
    return out;
}

struct PricerOptions {
    bool single_batch = false;  // reuse one path set for all dates (LS/TvR style)
    int threads = 1;
};

namespace detail {

inline double dot_basis(std::span<const double> beta, const BasisSpec& basis, double t,
                        double state, std::vector<double>& scratch) {
    eval_basis(basis, t, state, scratch);
    double s = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) s += beta[k] * scratch[k];
    return s;
}

/// Deterministic chunked mean (fixed reduction order for any worker count).
inline double chunked_mean(std::span<const double> xs, int threads) {
    constexpr std::size_t kChunk = 8192;
    const std::size_t n = xs.size();
    const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partials(n_chunks, 0.0);
    parallel_for(n_chunks, threads, [&](std::size_t c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(lo + kChunk, n);
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += xs[i];
        partials[c] = s;
    });
    double total = 0.0;
    for (double p : partials) total += p;
    return total / static_cast<double>(n);
}

}  // namespace detail

/// Backward-induction pricer of the approximate dynamic program:
/// C_m = 0; for n = m-1 .. 1, regress max(h_{n+1}, C_{n+1}) at t_{n+1}
/// against psi_n at t_n via quasi-regression on a fresh independent batch;
/// finally C_0 = mean of V_1 over one more fresh batch and
/// V_0 = max(h_0(S(0)), C_0). Fresh per-date batches are the default; the
/// shared-path variant sits behind options.single_batch.
inline CoefficientSet price_bermudan(ProcessKind process, const ExerciseGrid& grid,
                                     const PayoffSpec& payoff, const BasisSpec& basis,
                                     std::size_t n_paths, const SeedCoordinates& seed,
                                     const PricerOptions& options = {}) {
    grid.validate();
    basis.validate();
    if (n_paths < 1) throw std::invalid_argument("price_bermudan: need n_paths >= 1");
    const std::size_t m = grid.m();
    if (!payoff.applicable.empty() && payoff.applicable.size() != m + 1)
        throw std::invalid_argument("price_bermudan: payoff applicability must cover dates 0..m");
    if (payoff.kind == PayoffKind::LinearBasisCombination && !payoff.combo.empty() &&
        !payoff.combo[0].empty())
        throw std::invalid_argument("price_bermudan: combo payoff must be empty at date 0");

    // Exact Gram matrices at every regression date; abort naming the date.
    std::vector<GramAnalysis> grams(m);  // grams[n] for date n, n = 1..m-1
    for (std::size_t n = 1; n + 1 <= m; ++n) {
        grams[n] = gram_analysis(basis, grid.times[n - 1]);
        if (!grams[n].inverse_available)
            throw GramConditioningError("price_bermudan: Gram matrix refused at date " +
                                        std::to_string(n) + " (t = " +
                                        std::to_string(grid.times[n - 1]) + ")");
    }

    CoefficientSet result;
    result.seed = seed;
    result.process = process;
    result.basis = basis;
    result.dates = grid.times;
    result.generator = std::string(kGeneratorName);
    result.betas.assign(m >= 2 ? m - 1 : 0, {});

    const std::size_t width = static_cast<std::size_t>(basis.size());
    std::vector<double> scratch(width);

    if (!options.single_batch) {
        for (std::size_t n = m - 1; n >= 1; --n) {
            const double t_lo = grid.times[n - 1];
            const double t_hi = grid.times[n];
            const ExerciseGrid pair{{t_lo, t_hi}, grid.t0_state};
            const PathBatch batch = sample_paths(process, pair, n_paths,
                                                 seed.with(static_cast<std::uint64_t>(n)),
                                                 options.threads);
            std::vector<double> y(n_paths);
            std::vector<double> psi_rows(n_paths * width);
            for (std::size_t i = 0; i < n_paths; ++i) {
                const double s_next = batch.at(i, 1);
                double cont = 0.0;
                if (n + 1 <= m - 1)
                    cont = detail::dot_basis(result.betas[n], basis, t_hi, s_next, scratch);
                y[i] = std::max(payoff.value(n + 1, t_hi, s_next, basis), cont);
                eval_basis(basis, t_lo, batch.at(i, 0),
                           {psi_rows.data() + i * width, width});
            }
            result.betas[n - 1] = project(y, psi_rows, grams[n], options.threads);
            result.sample_sizes.push_back(n_paths);
        }
        const ExerciseGrid first{{grid.times[0]}, grid.t0_state};
        const PathBatch batch = sample_paths(process, first, n_paths, seed.with(0),
                                             options.threads);
        std::vector<double> v1(n_paths);
        for (std::size_t i = 0; i < n_paths; ++i) {
            const double s1 = batch.at(i, 0);
            double cont = 0.0;
            if (m >= 2)
                cont = detail::dot_basis(result.betas[0], basis, grid.times[0], s1, scratch);
            v1[i] = std::max(payoff.value(1, grid.times[0], s1, basis), cont);
        }
        result.continuation_estimate = detail::chunked_mean(v1, options.threads);
        result.sample_sizes.push_back(n_paths);
    } else {
        // Shared-path variant: one batch over the full grid, reused at every date.
        const PathBatch batch = sample_paths(process, grid, n_paths, seed.with(0),
                                             options.threads);
        std::vector<double> v(n_paths);
        for (std::size_t i = 0; i < n_paths; ++i)
            v[i] = std::max(payoff.value(m, grid.times[m - 1], batch.at(i, m - 1), basis), 0.0);
        std::vector<double> psi_rows(n_paths * width);
        for (std::size_t n = m - 1; n >= 1; --n) {
            const double t_n = grid.times[n - 1];
            for (std::size_t i = 0; i < n_paths; ++i)
                eval_basis(basis, t_n, batch.at(i, n - 1),
                           {psi_rows.data() + i * width, width});
            result.betas[n - 1] = project(v, psi_rows, grams[n], options.threads);
            result.sample_sizes.push_back(n_paths);
            for (std::size_t i = 0; i < n_paths; ++i) {
                const double cont = detail::dot_basis(result.betas[n - 1], basis, t_n,
                                                      batch.at(i, n - 1), scratch);
                v[i] = std::max(payoff.value(n, t_n, batch.at(i, n - 1), basis), cont);
            }
        }
        result.continuation_estimate = detail::chunked_mean(v, options.threads);
        result.sample_sizes.push_back(n_paths);
    }

    const double h0 = payoff.value(0, 0.0, grid.t0_state, basis);
    result.value_estimate = std::max(h0, result.continuation_estimate);
    return result;
}

// ---------------------------------------------------------------------------
// Assumption diagnostics (B1), (B3)
// ---------------------------------------------------------------------------

struct AssumptionCheck {
    std::string condition;  // "B1-psi2", "B1-psi4", "B3"
    std::string detail;
    double lhs = 0.0, lhs_se = 0.0;
    double rhs = 0.0, rhs_se = 0.0;
    bool pass = true;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    bool all_pass = true;
};

/// Monte Carlo check of the Theorem 3 hypotheses: the (B1) moment
/// monotonicity chain and the (B3) payoff fourth-moment bound, each side
/// estimated with a standard error. Failures warn; the pricer stays usable
/// outside the theorem's hypotheses. Date 0 of (B3) is skipped (t_{-1} is
/// undefined); at date 1 the ratio t_1/t_0 is infinite, so (B3) holds
/// trivially there unless K = 0.
inline AssumptionReport check_assumptions(ProcessKind process, const ExerciseGrid& grid,
                                          const PayoffSpec& payoff, const BasisSpec& basis,
                                          std::size_t probe_paths,
                                          const SeedCoordinates& seed, int threads = 1) {
    grid.validate();
    basis.validate();
    if (probe_paths < 10000)
        throw std::invalid_argument("check_assumptions: need probe_paths >= 10^4");
    const std::size_t m = grid.m();
    const int K = basis.order;
    const std::size_t width = static_cast<std::size_t>(basis.size());
    const PathBatch batch = sample_paths(process, grid, probe_paths, seed, threads);

    // mean and stderr of psi^2, psi^4 per (date, k), and of h^4 per date
    std::vector<std::vector<double>> m2(m, std::vector<double>(width, 0.0)), m2se = m2,
        m4 = m2, m4se = m2;
    std::vector<double> h4(m, 0.0), h4se(m, 0.0);
    std::vector<double> psi(width);
    const double dn = static_cast<double>(probe_paths);
    for (std::size_t n = 0; n < m; ++n) {
        const double t = grid.times[n];
        std::vector<double> s2(width, 0.0), s4(width, 0.0), s8(width, 0.0), sq4(width, 0.0);
        double sh4 = 0.0, sh8 = 0.0;
        for (std::size_t i = 0; i < probe_paths; ++i) {
            eval_basis(basis, t, batch.at(i, n), psi);
            for (std::size_t k = 0; k < width; ++k) {
                const double p2 = psi[k] * psi[k];
                const double p4 = p2 * p2;
                s2[k] += p2;
                sq4[k] += p4;  // for Var(psi^2)
                s4[k] += p4;
                s8[k] += p4 * p4;
            }
            const double h = payoff.value(n + 1, t, batch.at(i, n), basis);
            const double hh4 = h * h * h * h;
            sh4 += hh4;
            sh8 += hh4 * hh4;
        }
        for (std::size_t k = 0; k < width; ++k) {
            m2[n][k] = s2[k] / dn;
            m2se[n][k] = std::sqrt(std::max(sq4[k] / dn - m2[n][k] * m2[n][k], 0.0) / dn);
            m4[n][k] = s4[k] / dn;
            m4se[n][k] = std::sqrt(std::max(s8[k] / dn - m4[n][k] * m4[n][k], 0.0) / dn);
        }
        h4[n] = sh4 / dn;
        h4se[n] = std::sqrt(std::max(sh8 / dn - h4[n] * h4[n], 0.0) / dn);
    }

    AssumptionReport report;
    // Noise allowance capped at a quarter of each point estimate: for these
    // nonnegative heavy-tailed variables the sample mean is biased low, so a
    // point estimate far above the right side is a violation even when its
    // own standard error is enormous.
    auto add = [&](const char* cond, std::string detail, double lhs, double lse, double rhs,
                   double rse) {
        AssumptionCheck c;
        c.condition = cond;
        c.detail = std::move(detail);
        c.lhs = lhs;
        c.lhs_se = lse;
        c.rhs = rhs;
        c.rhs_se = rse;
        const double slack =
            2.0 * std::min(lse, 0.25 * lhs) + 2.0 * std::min(rse, 0.25 * rhs);
        c.pass = lhs <= rhs + slack;
        report.all_pass = report.all_pass && c.pass;
        report.checks.push_back(std::move(c));
    };

    for (std::size_t n = 0; n < m; ++n)
        for (std::size_t k = 0; k + 1 < width; ++k) {
            add("B1-psi2", "k -> k+1 at date " + std::to_string(n + 1) + ", k = " + std::to_string(k),
                m2[n][k], m2se[n][k], m2[n][k + 1], m2se[n][k + 1]);
            add("B1-psi4", "k -> k+1 at date " + std::to_string(n + 1) + ", k = " + std::to_string(k),
                m4[n][k], m4se[n][k], m4[n][k + 1], m4se[n][k + 1]);
        }
    for (std::size_t n = 0; n + 1 < m; ++n)
        for (std::size_t k = 0; k < width; ++k) {
            add("B1-psi2", "date " + std::to_string(n + 1) + " -> " + std::to_string(n + 2) +
                               ", k = " + std::to_string(k),
                m2[n][k], m2se[n][k], m2[n + 1][k], m2se[n + 1][k]);
            add("B1-psi4", "date " + std::to_string(n + 1) + " -> " + std::to_string(n + 2) +
                               ", k = " + std::to_string(k),
                m4[n][k], m4se[n][k], m4[n + 1][k], m4se[n + 1][k]);
        }
    for (std::size_t n = 0; n < m; ++n) {
        const double prev_t = n == 0 ? 0.0 : grid.times[n - 1];
        double factor;
        if (n == 0)
            factor = K == 0 ? 1.0 : std::numeric_limits<double>::infinity();
        else
            factor = std::pow(grid.times[n] / prev_t, 2.0 * K);
        add("B3", "date " + std::to_string(n + 1), h4[n], h4se[n], factor * m4[n][width - 1],
            factor * m4se[n][width - 1]);
    }
    return report;
}

}  // namespace amrmc

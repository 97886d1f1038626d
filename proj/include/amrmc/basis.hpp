#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amrmc {

enum class BasisFamily {
    HermiteNormalized,      // psi_k(x) = He_k(x / sqrt(t)) / sqrt(k!)
    ExponentialMartingale,  // psi_k(S(t)) = exp(k W(t) - k^2 t / 2)
};

inline std::string to_string(BasisFamily f) {
    return f == BasisFamily::HermiteNormalized ? "hermite" : "expmart";
}

/// A basis family of order K (K+1 functions, index 0 identically 1).
struct BasisSpec {
    BasisFamily family = BasisFamily::HermiteNormalized;
    int order = 0;  // K

    int size() const { return order + 1; }

    void validate() const {
        if (order < 0) throw std::invalid_argument("BasisSpec: order must be >= 0");
    }
};

/// Probabilists' Hermite polynomial He_n(x) by the three-term recurrence
/// He_{n+1} = x He_n - n He_{n-1}. The alternating factorial sum cancels
/// catastrophically for n >= 20 and is kept only as a test oracle.
inline double hermite(int n, double x) {
    if (n < 0) throw std::invalid_argument("hermite: degree must be >= 0");
    double p0 = 1.0;
    if (n == 0) return p0;
    double p1 = x;
    for (int k = 1; k < n; ++k) {
        const double p2 = x * p1 - static_cast<double>(k) * p0;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

namespace detail {

/// Orthonormal Hermite values psi_k = He_k(y) / sqrt(k!) for k = 0..K,
/// via the scaled recurrence psi_{k+1} = (y psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1).
/// The 1/sqrt(k!) scale is maintained iteratively; k! itself is never formed.
inline void hermite_normalized(int K, double y, std::span<double> out) {
    out[0] = 1.0;
    if (K == 0) return;
    out[1] = y;
    for (int k = 1; k < K; ++k)
        out[k + 1] = (y * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                     std::sqrt(static_cast<double>(k) + 1.0);
}

/// Exponential-martingale values psi_k = S^k exp(k(1-k)t/2) for k = 0..K.
/// Recurrence psi_{k+1} = psi_k * S * e^{-kt} keeps psi_0 = 1 and psi_1 = S exact.
inline void exp_martingale(int K, double t, double state, std::span<double> out) {
    out[0] = 1.0;
    if (K == 0) return;
    out[1] = state;
    const double decay = std::exp(-t);
    double g = decay;  // e^{-kt} for the step producing psi_{k+1}
    for (int k = 1; k < K; ++k) {
        out[k + 1] = out[k] * state * g;
        g *= decay;
    }
}

}  // namespace detail

/// Evaluates psi_0..psi_K at the given date and state into out (size K+1).
/// For the exponential-martingale family the input is the state S(t); the
/// Brownian coordinate W(t) = log S(t) + t/2 is implicit in the recurrence.
inline void eval_basis(const BasisSpec& spec, double t, double state,
                       std::span<double> out) {
    spec.validate();
    if (!(t > 0.0)) throw std::invalid_argument("eval_basis: t must be positive");
    if (spec.family == BasisFamily::HermiteNormalized) {
        detail::hermite_normalized(spec.order, state / std::sqrt(t), out);
    } else {
        if (!(state > 0.0))
            throw std::invalid_argument("eval_basis: state must be positive for the geometric family");
        detail::exp_martingale(spec.order, t, state, out);
    }
}

inline std::vector<double> eval_basis(const BasisSpec& spec, double t, double state) {
    std::vector<double> out(spec.size());
    eval_basis(spec, t, state, out);
    return out;
}

/// Deterministic time factor f_k(t) making f_k(t) psi_k(S(t)) a martingale:
/// t^{k/2} for normalized Hermite, 1 for the exponential-martingale family
/// (whose members are martingales already).
inline double martingale_scale(const BasisSpec& spec, int k, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("martingale_scale: t must be positive");
    if (spec.family == BasisFamily::ExponentialMartingale) return 1.0;
    return std::pow(t, 0.5 * k);
}

/// (He_n)^2 = sum_i c_i He_{2i} with c_i = (n!)^2 / ((i!)^2 (n-i)!).
struct SquareExpansion {
    int degree = 0;
    std::vector<double> coefficients;  // c_0 .. c_n, all positive
};

inline SquareExpansion hermite_square_expansion(int n) {
    if (n < 0) throw std::invalid_argument("hermite_square_expansion: degree must be >= 0");
    SquareExpansion ex;
    ex.degree = n;
    ex.coefficients.resize(n + 1);
    // c_0 = n!, then c_{i+1} = c_i (n-i) / (i+1)^2.
    double c = 1.0;
    for (int i = 1; i <= n; ++i) c *= i;
    for (int i = 0; i <= n; ++i) {
        ex.coefficients[i] = c;
        const double step = static_cast<double>(i) + 1.0;
        c *= static_cast<double>(n - i) / (step * step);
    }
    return ex;
}

}  // namespace amrmc

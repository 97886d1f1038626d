#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace amrmc {

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double log_binomial(int n, int k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// log(sum(exp(x_i))), stable against overflow.
inline double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (!std::isfinite(a)) return a;
    return a + std::log1p(std::exp(b - a));
}

}  // namespace amrmc

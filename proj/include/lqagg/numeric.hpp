#ifndef LQAGG_NUMERIC_HPP
#define LQAGG_NUMERIC_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lqagg/errors.hpp"

namespace lqagg::numeric {

// log(sum_i exp(args[i])) without overflow. Returns -inf for an all -inf input.
inline double log_sum_exp(std::span<const double> args) {
    if (args.empty()) throw validation_error("log_sum_exp: empty input");
    double max_arg = *std::max_element(args.begin(), args.end());
    if (!std::isfinite(max_arg)) {
        // all -inf -> -inf; any +inf/NaN is a caller bug surfaced as-is
        return max_arg;
    }
    double sum = 0.0;
    for (double a : args) sum += std::exp(a - max_arg);
    return max_arg + std::log(sum);
}

// exp(logs[i] - log_sum_exp(logs)); sums to 1 by construction.
inline std::vector<double> softmax_from_logs(std::span<const double> logs) {
    double lse = log_sum_exp(logs);
    std::vector<double> out(logs.size());
    if (!std::isfinite(lse)) throw validation_error("softmax_from_logs: total mass is zero");
    double total = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        out[i] = std::exp(logs[i] - lse);
        total += out[i];
    }
    for (double& w : out) w /= total;
    return out;
}

inline double log_binomial(int n, int k) {
    if (k < 0 || k > n) throw validation_error("log_binomial: k out of range");
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw validation_error("mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Sample standard deviation (denominator n-1).
inline double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) throw validation_error("sample_sd: need at least two values");
    double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// Least-squares slope of y on x.
inline double linear_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw validation_error("linear_slope: need >= 2 matched points");
    double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw validation_error("linear_slope: degenerate abscissae");
    return sxy / sxx;
}

// ceil() that first snaps to the nearest integer within 1e-9, so that values
// like pow(100, 0.5) = 10 + 2ulp do not get bumped to 11.
inline int snapped_ceil(double x) {
    double r = std::nearbyint(x);
    if (std::abs(x - r) < 1e-9) return static_cast<int>(r);
    return static_cast<int>(std::ceil(x));
}

} // namespace lqagg::numeric

#endif

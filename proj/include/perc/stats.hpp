#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace perc {

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct Estimate {
    double value = 0.0;
    ConfidenceInterval ci;
    std::int64_t n = 0;
};

// Normal-approximation CI for a binomial proportion, clamped to [0,1].
inline Estimate binomial_estimate(std::int64_t successes, std::int64_t trials, double z = 1.96) {
    Estimate e;
    e.n = trials;
    if (trials <= 0) return e;
    const double p = (double)successes / (double)trials;
    const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / (double)trials);
    e.value = p;
    e.ci.lo = std::max(0.0, p - z * se);
    e.ci.hi = std::min(1.0, p + z * se);
    return e;
}

inline double binomial_stderr(std::int64_t successes, std::int64_t trials) {
    if (trials <= 0) return 0.0;
    const double p = (double)successes / (double)trials;
    return std::sqrt(std::max(p * (1.0 - p), 0.0) / (double)trials);
}

inline Estimate mean_estimate(const std::vector<double>& xs, double z = 1.96) {
    Estimate e;
    e.n = (std::int64_t)xs.size();
    if (xs.empty()) return e;
    double s = 0.0;
    for (double x : xs) s += x;
    const double mean = s / (double)xs.size();
    double v = 0.0;
    for (double x : xs) v += (x - mean) * (x - mean);
    const double var = xs.size() > 1 ? v / (double)(xs.size() - 1) : 0.0;
    const double se = std::sqrt(var / (double)xs.size());
    e.value = mean;
    e.ci.lo = mean - z * se;
    e.ci.hi = mean + z * se;
    return e;
}

}  // namespace perc

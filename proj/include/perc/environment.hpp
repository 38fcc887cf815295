#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "perc/lattice.hpp"
#include "perc/report.hpp"
#include "perc/rng.hpp"

namespace perc {

struct EnvironmentConfig {
    double delta = 0.0;   // probability that a line is bad
    i64 L = 108;          // scale parameter, >= 3 and divisible by 3
    i64 window_len = 0;   // lines 0 .. window_len-1
    u64 rng_seed = 0;

    void check() const {
        if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must be in [0,1]");
        if (L < 3 || L % 3 != 0) throw std::invalid_argument("L must be >= 3 and divisible by 3");
        if (window_len < 1) throw std::invalid_argument("window_len must be >= 1");
    }
};

// The set of bad-line indices over a finite window, kept sorted.
struct Environment {
    EnvironmentConfig config;
    std::vector<i64> gamma;

    bool is_bad_line(i64 row) const {
        return std::binary_search(gamma.begin(), gamma.end(), row);
    }
};

inline bool line_is_bad(const EnvironmentConfig& cfg, i64 line) {
    return rng::hash2(cfg.rng_seed, (u64)line) < rng::threshold_for(cfg.delta);
}

inline Environment sample_environment(const EnvironmentConfig& cfg) {
    cfg.check();
    Environment env;
    env.config = cfg;
    for (i64 i = 0; i < cfg.window_len; ++i)
        if (line_is_bad(cfg, i)) env.gamma.push_back(i);
    return env;
}

// Environment with all bad lines at indices <= n removed.
inline Environment zero_prefix(const Environment& env, i64 n) {
    if (n < 0) throw std::invalid_argument("zero_prefix: n must be >= 0");
    Environment out;
    out.config = env.config;
    for (i64 x : env.gamma)
        if (x > n) out.gamma.push_back(x);
    return out;
}

struct ValidationReport {
    bool gate_cluster_finiteness = false;  // 64 * delta * L^2 < 1
    bool gate_L_multiple_of_3 = false;     // L >= 12 and L % 3 == 0
    bool gate_L_108 = false;               // L >= 108
    std::optional<bool> gate_c_inverse_integer;
    std::optional<bool> gate_cL_half_integer;
    std::optional<bool> gate_c_below_edge_speed;  // c < (3/14) * s(p_G)

    bool all_structural_ok() const {
        return gate_cluster_finiteness && gate_L_multiple_of_3 && gate_L_108;
    }
};

inline ValidationReport validate(const EnvironmentConfig& cfg,
                                 std::optional<double> c = std::nullopt,
                                 std::optional<double> estimated_edge_speed = std::nullopt) {
    ValidationReport r;
    r.gate_cluster_finiteness = 64.0 * cfg.delta * (double)cfg.L * (double)cfg.L < 1.0;
    r.gate_L_multiple_of_3 = cfg.L >= 12 && cfg.L % 3 == 0;
    r.gate_L_108 = cfg.L >= 108;
    if (c) {
        const double cv = *c;
        auto near_integer = [](double v) { return std::abs(v - std::round(v)) < 1e-9; };
        r.gate_c_inverse_integer = cv > 0.0 && near_integer(1.0 / cv);
        r.gate_cL_half_integer = near_integer(cv * (double)cfg.L / 2.0);
        if (estimated_edge_speed)
            r.gate_c_below_edge_speed = cv < (3.0 / 14.0) * (*estimated_edge_speed);
    }
    return r;
}

}  // namespace perc

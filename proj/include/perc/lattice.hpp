#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace perc {

using i64 = std::int64_t;
using u64 = std::uint64_t;

// Closed integer interval [lo, hi]; empty when hi < lo.
struct Interval {
    i64 lo = 0;
    i64 hi = -1;

    bool empty() const { return hi < lo; }
    i64 length() const { return empty() ? 0 : hi - lo + 1; }
    bool contains(i64 x) const { return lo <= x && x <= hi; }
    bool contains(const Interval& o) const { return o.empty() || (lo <= o.lo && o.hi <= hi); }
    bool intersects(const Interval& o) const {
        return !empty() && !o.empty() && lo <= o.hi && o.lo <= hi;
    }
    Interval intersect(const Interval& o) const {
        return Interval{std::max(lo, o.lo), std::min(hi, o.hi)};
    }
    bool operator==(const Interval& o) const { return lo == o.lo && hi == o.hi; }
};

inline i64 interval_distance(const Interval& a, const Interval& b) {
    if (a.intersects(b)) return 0;
    if (a.hi < b.lo) return b.lo - a.hi;
    return a.lo - b.hi;
}

// |A triangle B| for closed intervals, treating them as integer point sets.
inline i64 symmetric_difference_size(const Interval& a, const Interval& b) {
    const i64 inter = a.intersect(b).length();
    return a.length() + b.length() - 2 * inter;
}

// The lattice is {(x,y) : y >= 0, x+y even}; steps go to (x-1,y+1) and (x+1,y+1).
inline bool on_lattice(i64 x, i64 y) { return y >= 0 && (((x + y) & 1) == 0); }

// Axis-aligned rectangle of lattice sites: x in [x_lo,x_hi], y in rows.
struct Rect {
    Interval x;
    Interval rows;

    bool contains(i64 px, i64 py) const { return x.contains(px) && rows.contains(py); }
    bool empty() const { return x.empty() || rows.empty(); }
};

inline bool ipow_would_overflow(i64 base, int exp) {
    i64 r = 1;
    for (int i = 0; i < exp; ++i) {
        if (base != 0 && r > (i64(1) << 62) / base) return true;
        r *= base;
    }
    return false;
}

inline i64 ipow(i64 base, int exp) {
    i64 r = 1;
    for (int i = 0; i < exp; ++i) {
        if (base != 0 && r > (i64(1) << 62) / (base > 0 ? base : -base))
            throw std::overflow_error("ipow overflow");
        r *= base;
    }
    return r;
}

inline i64 floor_div(i64 a, i64 b) {
    i64 q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline i64 ceil_div(i64 a, i64 b) { return -floor_div(-a, b); }

}  // namespace perc

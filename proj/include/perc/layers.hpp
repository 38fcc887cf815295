#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "perc/clusters.hpp"
#include "perc/environment.hpp"
#include "perc/lattice.hpp"
#include "perc/report.hpp"

namespace perc {

enum class LayerKind { ExceptionalFirst, GoodType1, GoodType2, Bad };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::ExceptionalFirst: return "exceptional-first";
        case LayerKind::GoodType1: return "good-type-1";
        case LayerKind::GoodType2: return "good-type-2";
        case LayerKind::Bad: return "bad";
    }
    return "?";
}

struct LayerSpec {
    int scale = 0;
    i64 rank = 0;  // 1-based position in the relabeled partition
    Interval support;
    LayerKind kind = LayerKind::GoodType2;
    i64 j = 0, i = 0;  // pre-relabeling pair
    Interval kernel_rows;  // K (good layers; whole support for type 2)
    Interval d_rows;       // D
    Interval dk_rows;      // D^K
    Interval f_rows;       // F: lowest (k-1)-layer for forward stacks, highest for reversed
    i64 cluster = -1;      // hierarchy cluster id for type-1/bad layers
    bool truncated = false;

    bool good() const {
        return kind == LayerKind::GoodType1 || kind == LayerKind::GoodType2;
    }
};

struct ScaleLayers {
    std::vector<LayerSpec> layers;   // increasing support order; rank = index+1
    std::vector<i64> b_counts;       // b^k_j (or bhat^k_j) for j = 1..#clusters seen
    std::vector<i64> btilde_counts;  // btilde^k_j
    std::vector<i64> cluster_ids;    // tilde C_{k,j} ids, 1-based j
    bool complete = false;           // scale ends with a truncated layer otherwise
};

struct LayerStack {
    bool reversed = false;
    i64 L = 0;
    i64 window = 0;
    std::vector<ScaleLayers> per_scale;  // index k-1 holds scale k

    int k_top() const { return (int)per_scale.size(); }
    const ScaleLayers& scale(int k) const {
        if (k < 1 || k > k_top()) throw std::out_of_range("no such scale");
        return per_scale[(std::size_t)(k - 1)];
    }
    const LayerSpec& layer(int k, i64 rank) const {
        const auto& s = scale(k).layers;
        if (rank < 1 || rank > (i64)s.size()) throw std::out_of_range("no such rank");
        return s[(std::size_t)(rank - 1)];
    }
    // Rank of the layer whose support contains the row; 0 if outside the window.
    i64 rank_of_row(int k, i64 row) const {
        const auto& s = scale(k).layers;
        auto it = std::upper_bound(s.begin(), s.end(), row, [](i64 r, const LayerSpec& l) {
            return r < l.support.lo;
        });
        if (it == s.begin()) return 0;
        --it;
        return it->support.contains(row) ? it->rank : 0;
    }
};

namespace detail {

// Uniform view of scale k-1: for k==1 it is the virtual partition of single
// rows with alpha^0_r = omega^0_r = r; otherwise the materialized layers.
struct PrevScale {
    const std::vector<LayerSpec>* layers = nullptr;  // null => virtual rows
    i64 window = 0;

    i64 max_rank() const { return layers ? (i64)layers->size() : window - 1; }
    i64 bot(i64 r) const { return layers ? (*layers)[(std::size_t)(r - 1)].support.lo : r; }
    i64 top(i64 r) const { return layers ? (*layers)[(std::size_t)(r - 1)].support.hi : r; }
    bool in_range(i64 r) const {
        return layers ? (r >= 1 && r <= (i64)layers->size()) : (r >= 0 && r < window);
    }
    // -1 when the row is not covered by a materialized layer
    i64 rank_of_row(i64 row) const {
        if (!layers) return (row >= 0 && row < window) ? row : -1;
        auto it = std::upper_bound(layers->begin(), layers->end(), row,
                                   [](i64 rr, const LayerSpec& l) { return rr < l.support.lo; });
        if (it == layers->begin()) return -1;
        --it;
        return (it->support.contains(row) && !it->truncated) ? it->rank : -1;
    }
};

struct ClusterRef {
    i64 alpha, omega, mass, id;
};

inline std::vector<ClusterRef> scale_clusters(const ClusterHierarchy& h, i64 k) {
    std::vector<ClusterRef> out;
    for (i64 id : h.mass_at_least(k)) {
        const Cluster& c = h.clusters[(std::size_t)id];
        out.push_back({c.alpha(), c.omega(), c.mass, c.id});
    }
    return out;
}

// Shared by the forward and reversed builders.
struct ScaleBuilder {
    int k;
    i64 L, lk3, window;
    const PrevScale& prev;
    ScaleLayers out;
    bool stopped = false;

    ScaleBuilder(int k_, i64 L_, i64 window_, const PrevScale& prev_)
        : k(k_), L(L_), window(window_), prev(prev_) {
        lk3 = ipow(L, k) / 3;
    }

    void emit(LayerSpec l) {
        if (stopped) return;
        if (l.support.lo >= window) { stopped = true; return; }
        if (l.support.empty()) return;  // degenerate at small L; legal only below L=108
        if (l.support.hi >= window - 1) {
            l.support.hi = std::min(l.support.hi, window - 1);
            l.truncated = true;
            stopped = true;
        }
        l.scale = k;
        l.rank = (i64)out.layers.size() + 1;
        out.layers.push_back(l);
    }

    i64 prev_end() const {
        return out.layers.empty() ? -1 : out.layers.back().support.hi;
    }
};

inline Interval prev_rows(const PrevScale& p, i64 r) { return {p.bot(r), p.top(r)}; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward construction
// ---------------------------------------------------------------------------

namespace detail {

inline ScaleLayers build_forward_scale(int k, i64 L, i64 window,
                                       const std::vector<ClusterRef>& cl, const PrevScale& prev) {
    ScaleBuilder bld(k, L, window, prev);

    // first layer
    {
        LayerSpec l;
        l.kind = LayerKind::ExceptionalFirst;
        l.j = 0;
        l.i = 0;
        if (k == 1)
            l.support = {0, 1};
        else {
            if (prev.max_rank() < 3) return bld.out;  // scale does not fit the window
            l.support = {0, prev.top(3)};
        }
        l.kernel_rows = l.support;
        l.f_rows = prev_rows(prev, prev.rank_of_row(0));
        bld.emit(l);
    }

    auto type2 = [&](i64 j, i64 i, i64 top) {
        LayerSpec l;
        l.kind = LayerKind::GoodType2;
        l.j = j;
        l.i = i;
        l.support = {bld.prev_end() + 1, top};
        const i64 t = prev.rank_of_row(top);
        if (t >= 0) {
            l.dk_rows = prev_rows(prev, t);
            l.d_rows = {prev.in_range(t - 1) ? prev.bot(t - 1) : prev.bot(t), prev.top(t)};
        }
        l.kernel_rows = l.support;
        const i64 fb = prev.rank_of_row(l.support.lo);
        if (fb >= 0) l.f_rows = prev_rows(prev, fb);
        bld.emit(l);
    };

    const i64 J = (i64)cl.size();
    for (i64 j = 0; j <= J && !bld.stopped; ++j) {
        const i64 base = (j == 0) ? 0 : cl[(std::size_t)(j - 1)].omega;
        if (j < J) {
            const detail::ClusterRef& nx = cl[(std::size_t)j];
            const i64 gap = (j == 0) ? nx.alpha : nx.alpha - base;
            const i64 btilde = gap / bld.lk3;
            if (btilde < 1)
                throw std::logic_error("layer construction: cluster gap below L^k/3 (chi != 0?)");
            const i64 b = btilde + (nx.mass > k ? 1 : 0);
            bld.out.btilde_counts.push_back(btilde);
            bld.out.b_counts.push_back(b);
            bld.out.cluster_ids.push_back(nx.id);
            for (i64 i = 1; i <= btilde - 1 && !bld.stopped; ++i) {
                const i64 r = prev.rank_of_row(base + i * bld.lk3);
                if (r < 0) { bld.stopped = true; break; }
                type2(j, i, prev.top(r));
            }
            if (bld.stopped) break;
            if (nx.mass > k) {
                type2(j, b - 1, nx.alpha - 1);
                LayerSpec l;
                l.kind = LayerKind::Bad;
                l.j = j + 1;
                l.i = 0;
                l.support = {nx.alpha, nx.omega};
                l.cluster = nx.id;
                bld.emit(l);
            } else {
                // good layer of type 1; the cluster spans one bad (k-1)-layer
                const i64 idx = prev.rank_of_row(nx.alpha);
                if (idx < 0 || !prev.in_range(idx + 3)) { bld.stopped = true; break; }
                LayerSpec l;
                l.kind = LayerKind::GoodType1;
                l.j = j + 1;
                l.i = 0;
                l.support = {bld.prev_end() + 1, prev.top(idx + 3)};
                l.kernel_rows = {l.support.lo, nx.alpha - 1};
                l.d_rows = {prev.bot(idx + 2), prev.top(idx + 3)};
                if (prev.in_range(idx - 1)) l.dk_rows = prev_rows(prev, idx - 1);
                const i64 fb = prev.rank_of_row(l.support.lo);
                if (fb >= 0) l.f_rows = prev_rows(prev, fb);
                l.cluster = nx.id;
                bld.emit(l);
            }
        } else {
            // no further cluster: keep emitting type-2 layers to the window top
            for (i64 i = 1; !bld.stopped; ++i) {
                const i64 row = base + i * bld.lk3;
                const i64 r = row < window ? prev.rank_of_row(row) : -1;
                if (r < 0) {
                    // close out with a truncated layer reaching the window top
                    if (bld.prev_end() < window - 1) {
                        LayerSpec l;
                        l.kind = LayerKind::GoodType2;
                        l.j = j;
                        l.i = i;
                        l.support = {bld.prev_end() + 1, window - 1};
                        l.kernel_rows = l.support;
                        l.truncated = true;
                        bld.emit(l);
                    }
                    bld.stopped = true;
                    break;
                }
                type2(j, i, prev.top(r));
            }
        }
    }
    bld.out.complete = !bld.out.layers.empty() && !bld.out.layers.back().truncated;
    return bld.out;
}

// ---------------------------------------------------------------------------
// Reversed construction
// ---------------------------------------------------------------------------

inline ScaleLayers build_reversed_scale(int k, i64 L, i64 window,
                                        const std::vector<ClusterRef>& cl, const PrevScale& prev) {
    ScaleBuilder bld(k, L, window, prev);

    {
        LayerSpec l;
        l.kind = LayerKind::ExceptionalFirst;
        l.j = 0;
        l.i = 0;
        if (k == 1)
            l.support = {0, 1};
        else {
            if (prev.max_rank() < 3) return bld.out;
            l.support = {0, prev.top(3)};
        }
        l.kernel_rows = l.support;
        bld.emit(l);
    }

    auto type2 = [&](i64 j, i64 i, i64 top) {
        LayerSpec l;
        l.kind = LayerKind::GoodType2;
        l.j = j;
        l.i = i;
        l.support = {bld.prev_end() + 1, top};
        const i64 t = prev.rank_of_row(l.support.lo);
        if (t >= 0) {
            l.dk_rows = prev_rows(prev, t);
            l.d_rows = {prev.bot(t), prev.in_range(t + 1) ? prev.top(t + 1) : prev.top(t)};
        }
        l.kernel_rows = l.support;
        const i64 ft = prev.rank_of_row(top);
        if (ft >= 0) l.f_rows = prev_rows(prev, ft);
        bld.emit(l);
    };

    const i64 J = (i64)cl.size();
    for (i64 j = 0; j <= J && !bld.stopped; ++j) {
        const i64 base = (j == 0) ? 0 : cl[(std::size_t)(j - 1)].omega;
        const i64 block_mass = (j == 0) ? -1 : cl[(std::size_t)(j - 1)].mass;
        // alpha-hat within this block: shifted by one grid step when the block's
        // own cluster has the minimal mass k
        auto grid_top = [&](i64 i) -> i64 {
            const i64 step = (block_mass == k) ? i + 1 : i;
            const i64 row = base + step * bld.lk3;
            if (row >= window) return -1;
            const i64 r = prev.rank_of_row(row);
            return r >= 0 ? prev.top(r) : -1;
        };
        if (j < J) {
            const detail::ClusterRef& nx = cl[(std::size_t)j];
            const i64 gap = (j == 0) ? nx.alpha : nx.alpha - base;
            const i64 btilde = gap / bld.lk3;
            if (btilde < 1)
                throw std::logic_error("reversed layer construction: cluster gap below L^k/3");
            const i64 bhat = btilde + ((j == 0) ? 1 : (block_mass > k ? 1 : 0));
            bld.out.btilde_counts.push_back(btilde);
            bld.out.b_counts.push_back(bhat);
            bld.out.cluster_ids.push_back(nx.id);
            for (i64 i = 1; i <= bhat - 2 && !bld.stopped; ++i) {
                const i64 top = grid_top(i);
                if (top < 0) { bld.stopped = true; break; }
                type2(j, i, top);
            }
            if (bld.stopped) break;
            // bottom of the next (j+1,0) layer
            i64 next_bot;
            const i64 h = prev.rank_of_row(nx.alpha);
            if (h < 0) { bld.stopped = true; break; }
            if (nx.mass == k) {
                if (!prev.in_range(h - 3)) { bld.stopped = true; break; }
                next_bot = prev.bot(h - 3);
            } else {
                next_bot = nx.alpha;
            }
            type2(j, bhat - 1, next_bot - 1);
            if (bld.stopped) break;
            if (nx.mass == k) {
                const i64 row = nx.omega + bld.lk3;
                const i64 r = row < window ? prev.rank_of_row(row) : -1;
                if (r < 0) { bld.stopped = true; break; }
                LayerSpec l;
                l.kind = LayerKind::GoodType1;
                l.j = j + 1;
                l.i = 0;
                l.support = {next_bot, prev.top(r)};
                l.kernel_rows = {nx.omega + 1, l.support.hi};
                l.d_rows = {prev.bot(h - 3), prev.top(h - 2)};
                if (prev.in_range(h + 1)) l.dk_rows = prev_rows(prev, h + 1);
                const i64 ft = prev.rank_of_row(l.support.hi);
                if (ft >= 0) l.f_rows = prev_rows(prev, ft);
                l.cluster = nx.id;
                bld.emit(l);
            } else {
                LayerSpec l;
                l.kind = LayerKind::Bad;
                l.j = j + 1;
                l.i = 0;
                l.support = {nx.alpha, nx.omega};
                l.cluster = nx.id;
                bld.emit(l);
            }
        } else {
            for (i64 i = 1; !bld.stopped; ++i) {
                const i64 top = grid_top(i);
                if (top < 0) {
                    if (bld.prev_end() < window - 1) {
                        LayerSpec l;
                        l.kind = LayerKind::GoodType2;
                        l.j = j;
                        l.i = i;
                        l.support = {bld.prev_end() + 1, window - 1};
                        l.kernel_rows = l.support;
                        l.truncated = true;
                        bld.emit(l);
                    }
                    bld.stopped = true;
                    break;
                }
                type2(j, i, top);
            }
        }
    }
    bld.out.complete = !bld.out.layers.empty() && !bld.out.layers.back().truncated;
    return bld.out;
}

inline ChiValue chi_of_hierarchy(const ClusterHierarchy& h) {
    ChiValue out;
    const i64 cap = h.window_len + 2;
    i64 worst = 0;
    bool any_provisional = false;
    for (i64 id : h.c_infinity) {
        const Cluster& c = h.clusters[(std::size_t)id];
        if (c.provisional) any_provisional = true;
        if (c.alpha() < pow_capped(h.L, c.mass, cap)) worst = std::max(worst, c.mass);
    }
    out.resolved = !any_provisional;
    out.value = worst;
    return out;
}

}  // namespace detail

struct LayerBuildOptions {
    int max_scale = 16;
    bool skip_chi_check = false;  // for tests on synthetic configurations
};

inline LayerStack build_layers_impl(const ClusterHierarchy& h, bool reversed,
                                    const LayerBuildOptions& opt) {
    if (!opt.skip_chi_check) {
        const ChiValue cv = detail::chi_of_hierarchy(h);
        if (!cv.resolved)
            throw std::invalid_argument("layer construction requires chi to be resolved (window too short)");
        if (cv.value != 0)
            throw std::invalid_argument("layer construction is defined only for environments with chi = 0");
    }
    LayerStack st;
    st.reversed = reversed;
    st.L = h.L;
    st.window = h.window_len;
    for (int k = 1; k <= opt.max_scale; ++k) {
        if (ipow_would_overflow(h.L, k) || ipow(h.L, k) / 3 >= h.window_len) break;
        detail::PrevScale prev;
        prev.window = h.window_len;
        if (k >= 2) prev.layers = &st.per_scale.back().layers;
        auto cl = detail::scale_clusters(h, k);
        ScaleLayers s = reversed ? detail::build_reversed_scale(k, h.L, h.window_len, cl, prev)
                                 : detail::build_forward_scale(k, h.L, h.window_len, cl, prev);
        if (s.layers.size() < 4) break;
        st.per_scale.push_back(std::move(s));
    }
    return st;
}

inline LayerStack build_layers(const ClusterHierarchy& h, const LayerBuildOptions& opt = {}) {
    return build_layers_impl(h, false, opt);
}

inline LayerStack build_reversed_layers(const ClusterHierarchy& h, const LayerBuildOptions& opt = {}) {
    return build_layers_impl(h, true, opt);
}

// Closed-form rank of the layer with pre-relabeling pair (j,i); equals the
// positional rank in the relabeled partition.
inline i64 rank(const LayerStack& st, int k, i64 j, i64 i) {
    const ScaleLayers& s = st.scale(k);
    if (j < 0 || i < 0 || j > (i64)s.b_counts.size())
        throw std::out_of_range("rank: no such pre-relabeling pair");
    if (j < (i64)s.b_counts.size() && i >= s.b_counts[(std::size_t)j])
        throw std::out_of_range("rank: i out of range for block j");
    i64 r = i + 1;
    for (i64 l = 0; l < j; ++l) r += s.b_counts[(std::size_t)l];
    return r;
}

inline i64 rank_reversed(const LayerStack& st, int k, i64 j, i64 i) {
    if (!st.reversed) throw std::invalid_argument("rank_reversed needs a reversed stack");
    return rank(st, k, j, i);
}

// ---------------------------------------------------------------------------
// Structural verification of the two stacks
// ---------------------------------------------------------------------------

inline VerificationReport verify_layers(const LayerStack& fwd, const LayerStack& rev,
                                        const ClusterHierarchy& h) {
    VerificationReport rep;
    const i64 L = h.L;
    auto lname = [](const LayerSpec& l) {
        return std::string("layer k=") + std::to_string(l.scale) + " rank=" + std::to_string(l.rank) +
               " [" + std::to_string(l.support.lo) + "," + std::to_string(l.support.hi) + "] " +
               to_string(l.kind);
    };

    for (const LayerStack* stp : {&fwd, &rev}) {
        const LayerStack& st = *stp;
        const char* side = st.reversed ? "reversed" : "forward";
        for (int k = 1; k <= st.k_top(); ++k) {
            const auto& layers = st.scale(k).layers;
            const i64 lk = ipow(L, k);
            // contiguity + partition of the window
            if (layers.empty() || layers.front().support.lo != 0)
                rep.fail("partition", side, "scale does not start at row 0");
            for (std::size_t q = 0; q + 1 < layers.size(); ++q)
                if (layers[q + 1].support.lo != layers[q].support.hi + 1)
                    rep.fail("contiguity", side, lname(layers[q]) + " then " + lname(layers[q + 1]));
            for (const auto& l : layers) {
                if (l.truncated) continue;
                const bool first = l.rank == 1;
                if (l.good() && !first && L >= 108) {
                    const i64 ht = l.support.hi - l.support.lo;
                    if (!(lk / 4 <= ht && ht <= 2 * lk))
                        rep.fail("height", side, lname(l) + " height " + std::to_string(ht));
                }
                if (first && l.support.hi - l.support.lo > 2 * lk)
                    rep.fail("first-layer-height", side, lname(l));
                // bad layer supports equal their cluster span
                if (l.kind == LayerKind::Bad) {
                    const Cluster& c = h.clusters[(std::size_t)l.cluster];
                    if (!(l.support.lo == c.alpha() && l.support.hi == c.omega()))
                        rep.fail("bad-support-span", side, lname(l));
                    if (c.mass <= k)
                        rep.fail("bad-mass", side, lname(l) + " mass not above scale");
                }
                if (l.kind == LayerKind::GoodType1) {
                    const Cluster& c = h.clusters[(std::size_t)l.cluster];
                    if (c.mass != k) rep.fail("type1-mass", side, lname(l));
                    if (!l.support.contains(c.span)) rep.fail("type1-contains-cluster", side, lname(l));
                    if (!st.reversed && !(l.kernel_rows.lo == l.support.lo &&
                                          l.kernel_rows.hi == c.alpha() - 1))
                        rep.fail("type1-kernel", side, lname(l));
                    if (st.reversed && !(l.kernel_rows.hi == l.support.hi &&
                                         l.kernel_rows.lo == c.omega() + 1))
                        rep.fail("type1-kernel", side, lname(l));
                }
                if (l.kind == LayerKind::GoodType2 && l.kernel_rows != l.support)
                    rep.fail("type2-kernel", side, lname(l));
                // top of kernel = top of D^K rows (mirrored for reversed stacks)
                if (l.good() && !l.dk_rows.empty()) {
                    if (!st.reversed && l.dk_rows.hi != l.kernel_rows.hi)
                        rep.fail("kernel-dk-top", side, lname(l));
                    if (st.reversed && l.dk_rows.lo != l.kernel_rows.lo)
                        rep.fail("kernel-dk-top", side, lname(l));
                }
            }
            // each k-layer is a union of (k-1)-layers
            if (k >= 2) {
                const auto& prevl = st.scale(k - 1).layers;
                std::size_t pi = 0;
                for (const auto& l : layers) {
                    if (l.truncated) continue;
                    while (pi < prevl.size() && prevl[pi].support.lo < l.support.lo) ++pi;
                    if (pi >= prevl.size() || prevl[pi].support.lo != l.support.lo)
                        rep.fail("union-of-sublayers", side, lname(l) + " bottom misaligned");
                    i64 cover = l.support.lo - 1;
                    while (pi < prevl.size() && prevl[pi].support.hi <= l.support.hi) {
                        cover = prevl[pi].support.hi;
                        ++pi;
                    }
                    if (cover != l.support.hi)
                        rep.fail("union-of-sublayers", side, lname(l) + " top misaligned");
                }
            }
            // bad layers: in-between gaps hold no bad (k-1)-layer; followed by two type-2
            for (std::size_t q = 0; q < layers.size(); ++q) {
                const auto& l = layers[q];
                if (l.kind != LayerKind::Bad || l.truncated) continue;
                int type2_after = 0;
                for (std::size_t w = q + 1; w < layers.size() && type2_after < 2; ++w) {
                    if (layers[w].truncated) break;
                    if (layers[w].kind == LayerKind::GoodType2)
                        ++type2_after;
                    else
                        break;
                }
                if (type2_after < 2 && q + 3 <= layers.size())
                    rep.fail("bad-followed-by-type2", side, lname(l));
            }
        }

        // good type-2 layers contain no bad sublayer, type-1 exactly one
        for (int k = 1; k <= st.k_top(); ++k) {
            const auto& layers = st.scale(k).layers;
            auto bad_sublayers_in = [&](const Interval& rows) -> i64 {
                if (k == 1) {
                    i64 c = 0;
                    for (i64 x : h.gamma)
                        if (rows.contains(x)) ++c;
                    return c;
                }
                i64 c = 0;
                for (const auto& p : st.scale(k - 1).layers)
                    if (p.kind == LayerKind::Bad && rows.contains(p.support)) ++c;
                return c;
            };
            for (const auto& l : layers) {
                if (l.truncated) continue;
                if (l.kind == LayerKind::GoodType2 && bad_sublayers_in(l.support) != 0)
                    rep.fail("type2-no-bad-sublayer", side, lname(l));
                if (l.kind == LayerKind::GoodType1 && bad_sublayers_in(l.support) != 1)
                    rep.fail("type1-one-bad-sublayer", side, lname(l));
                // sublayers inside the kernel are good
                if (l.good() && !l.kernel_rows.empty() && bad_sublayers_in(l.kernel_rows) != 0)
                    rep.fail("kernel-sublayers-good", side, lname(l));
            }
        }

        // rank formulas against enumeration
        for (int k = 1; k <= st.k_top(); ++k) {
            const auto& s = st.scale(k);
            for (const auto& l : s.layers) {
                if (l.j < (i64)s.b_counts.size() || l.i == 0) {
                    i64 r = l.i + 1;
                    for (i64 q = 0; q < l.j; ++q) r += s.b_counts[(std::size_t)q];
                    if (r != l.rank)
                        rep.fail("rank-formula", side, lname(l) + " formula gives " + std::to_string(r));
                }
            }
        }
    }

    // forward-only facts: bad (k-1)-layers never intersect inter-cluster gaps,
    // and constituent index gaps are at least L/6
    for (const LayerStack* stp : {&fwd, &rev}) {
        const LayerStack& st = *stp;
        const char* side = st.reversed ? "reversed" : "forward";
        for (int k = 1; k <= st.k_top(); ++k) {
            auto cl = detail::scale_clusters(h, k);
            auto bad_intersects = [&](const Interval& rows) {
                if (k == 1) {
                    for (i64 x : h.gamma)
                        if (rows.contains(x)) return true;
                    return false;
                }
                for (const auto& p : st.scale(k - 1).layers)
                    if (p.kind == LayerKind::Bad && !p.truncated && p.support.intersects(rows))
                        return true;
                return false;
            };
            for (std::size_t j = 0; j + 1 <= cl.size(); ++j) {
                const Interval gap = (j == 0) ? Interval{1, cl[0].alpha - 1}
                                              : Interval{cl[j - 1].omega + 1, cl[j].alpha - 1};
                if (!gap.empty() && gap.hi < st.window && bad_intersects(gap))
                    rep.fail("bad-outside-cluster-gaps", side,
                             "scale " + std::to_string(k) + " gap before cluster " + std::to_string(j + 1));
            }
            // index gap between consecutive clusters at the previous scale
            if (k >= 2 && L >= 108) {
                const auto& prevst = st.scale(k - 1);
                for (std::size_t j = 0; j + 1 <= cl.size(); ++j) {
                    const i64 lo = (j == 0) ? 0 : st.rank_of_row(k - 1, cl[j - 1].omega);
                    const i64 hi = st.rank_of_row(k - 1, cl[j].alpha);
                    if (lo < 0 || hi < 1) continue;
                    if ((i64)prevst.layers.size() < hi) continue;
                    if (hi - lo < L / 6)
                        rep.fail("cluster-index-gap", side,
                                 "scale " + std::to_string(k) + ": i_{j+1}-i'_j = " +
                                     std::to_string(hi - lo) + " < L/6");
                }
            }
        }
    }

    // |H^k_u  triangle  Hhat^k_u| <= 20 L^{k-1}
    for (int k = 1; k <= std::min(fwd.k_top(), rev.k_top()); ++k) {
        const auto& a = fwd.scale(k).layers;
        const auto& b = rev.scale(k).layers;
        const i64 bound = 20 * ipow(L, k - 1);
        const std::size_t n = std::min(a.size(), b.size());
        for (std::size_t q = 0; q < n; ++q) {
            if (a[q].truncated || b[q].truncated) break;
            if (symmetric_difference_size(a[q].support, b[q].support) > bound)
                rep.fail("forward-reversed-difference", "scale " + std::to_string(k),
                         lname(a[q]) + " vs " + lname(b[q]));
        }
        // rank shift: the reversed rank exceeds the forward rank exactly for
        // blocks whose cluster has the minimal mass k
        const auto& fs = fwd.scale(k);
        const auto& rs = rev.scale(k);
        for (std::size_t j = 0; j < std::min(fs.b_counts.size(), rs.b_counts.size()); ++j) {
            const Cluster& c = h.clusters[(std::size_t)fs.cluster_ids[j]];
            if (c.provisional) continue;
            i64 rf = 1, rr = 1;  // rank of (j+1, 0)
            for (std::size_t q = 0; q <= j; ++q) rf += fs.b_counts[q];
            for (std::size_t q = 0; q <= j; ++q) rr += rs.b_counts[q];
            const i64 expect = (c.mass == k) ? 1 : 0;
            if (rr - rf != expect)
                rep.fail("rank-shift", "scale " + std::to_string(k),
                         "block " + std::to_string(j + 1) + ": rhat-r = " + std::to_string(rr - rf));
        }
    }
    return rep;
}

}  // namespace perc

#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "perc/environment.hpp"
#include "perc/lattice.hpp"
#include "perc/report.hpp"

namespace perc {

// L^e, saturated at `cap` so gap comparisons never overflow.
inline i64 pow_capped(i64 base, i64 e, i64 cap) {
    i64 r = 1;
    for (i64 i = 0; i < e; ++i) {
        if (r > cap / base) return cap;
        r *= base;
    }
    return std::min(r, cap);
}

struct Cluster {
    i64 id = -1;
    int level = 0;
    i64 mass = 1;
    Interval span;              // [alpha, omega]
    i64 first_pt = -1;          // index range into gamma; cluster = span `intersect` gamma
    i64 last_pt = -1;
    std::vector<i64> constituents;  // run members, empty for level <= 1
    i64 parent = -1;                // cluster that absorbed this one; -1 while maximal
    bool provisional = false;       // window truncation could still change this cluster

    i64 alpha() const { return span.lo; }
    i64 omega() const { return span.hi; }
    i64 n_points() const { return last_pt - first_pt + 1; }
};

struct ClusterHierarchy {
    i64 L = 0;
    i64 window_len = 0;
    u64 source_seed = 0;  // rng_seed of the environment this was built from
    std::vector<i64> gamma;
    std::vector<Cluster> clusters;
    std::vector<std::vector<i64>> stages;  // stages[k] = partition C_k (cluster ids, increasing)
    std::vector<i64> c_infinity;
    std::vector<i64> kappa;            // per gamma point
    std::vector<i64> maximal_cluster;  // per gamma point, id of the maximal cluster containing it
    int k_built = 0;                   // highest level at which a merge happened
    bool capped = false;               // merging stopped by the k_max cap
    std::vector<std::string> cap_notes;

    const std::vector<i64>& partition_at(i64 k) const {
        if (k < 0) throw std::invalid_argument("partition_at: k < 0");
        const std::size_t i = std::min<std::size_t>((std::size_t)k, stages.size() - 1);
        return stages[i];
    }

    // Clusters of C_k with mass >= k, in increasing order (start of the layer construction).
    std::vector<i64> mass_at_least(i64 k) const {
        std::vector<i64> out;
        for (i64 id : partition_at(k))
            if (clusters[(std::size_t)id].mass >= k) out.push_back(id);
        return out;
    }

    // Walks the merge chain upward; every cluster containing a given point lies on one chain.
    i64 top_ancestor(i64 id) const {
        while (clusters[(std::size_t)id].parent >= 0) id = clusters[(std::size_t)id].parent;
        return id;
    }
};

struct BuildOptions {
    i64 k_max = 64;        // level cap; merging always stops earlier in valid regimes
    bool complete = false; // configuration is exact (no window truncation semantics)
};

inline ClusterHierarchy build_hierarchy(const Environment& env, const BuildOptions& opt) {
    if (opt.k_max < 1) throw std::invalid_argument("build_hierarchy: k_max must be >= 1");
    ClusterHierarchy h;
    h.L = env.config.L;
    h.window_len = env.config.window_len;
    h.source_seed = env.config.rng_seed;
    h.gamma = env.gamma;

    const i64 n = (i64)env.gamma.size();
    std::vector<i64> current;  // C_k
    current.reserve((std::size_t)n);
    for (i64 j = 0; j < n; ++j) {
        Cluster c;
        c.id = (i64)h.clusters.size();
        c.level = 0;
        c.mass = 1;
        c.span = {env.gamma[(std::size_t)j], env.gamma[(std::size_t)j]};
        c.first_pt = c.last_pt = j;
        h.clusters.push_back(c);
        current.push_back(c.id);
    }
    h.stages.push_back(current);

    const i64 gap_cap = h.window_len + 2;
    for (i64 k = 0;; ++k) {
        // Maximal (k+1)-runs among clusters of C_k with mass >= k+1.
        std::vector<i64> cand;
        for (i64 id : current)
            if (h.clusters[(std::size_t)id].mass >= k + 1) cand.push_back(id);
        if ((i64)cand.size() < 2) break;

        const i64 reach = pow_capped(h.L, k + 1, gap_cap);
        std::vector<std::pair<i64, i64>> runs;  // index range into cand
        i64 s = 0;
        while (s < (i64)cand.size()) {
            i64 e = s;
            while (e + 1 < (i64)cand.size()) {
                const auto& a = h.clusters[(std::size_t)cand[(std::size_t)e]];
                const auto& b = h.clusters[(std::size_t)cand[(std::size_t)e + 1]];
                if (interval_distance(a.span, b.span) < reach)
                    ++e;
                else
                    break;
            }
            if (e > s) runs.push_back({s, e});
            s = e + 1;
        }
        if (runs.empty()) break;
        if (k + 1 > opt.k_max) {
            h.capped = true;
            for (auto& r : runs)
                h.cap_notes.push_back("unmerged " + std::to_string((i64)runs.size()) +
                                      "-run at level " + std::to_string(k + 1) + " starting at x=" +
                                      std::to_string(h.clusters[(std::size_t)cand[(std::size_t)r.first]].alpha()));
            break;
        }
        h.k_built = (int)(k + 1);

        std::vector<i64> next;
        std::size_t cur_idx = 0;
        for (auto& r : runs) {
            const Cluster& first = h.clusters[(std::size_t)cand[(std::size_t)r.first]];
            const Cluster& last = h.clusters[(std::size_t)cand[(std::size_t)r.second]];
            Cluster merged;
            merged.id = (i64)h.clusters.size();
            merged.level = (int)(k + 1);
            merged.span = {first.alpha(), last.omega()};
            merged.first_pt = first.first_pt;
            merged.last_pt = last.last_pt;
            i64 mass = 0;
            for (i64 q = r.first; q <= r.second; ++q) {
                merged.constituents.push_back(cand[(std::size_t)q]);
                mass += h.clusters[(std::size_t)cand[(std::size_t)q]].mass;
            }
            mass -= k * (i64)(r.second - r.first);
            merged.mass = mass;

            // Emit untouched clusters preceding the run, absorb everything inside its span.
            while (cur_idx < current.size()) {
                Cluster& c = h.clusters[(std::size_t)current[cur_idx]];
                if (c.span.hi < merged.span.lo) {
                    next.push_back(c.id);
                    ++cur_idx;
                } else if (c.span.lo <= merged.span.hi) {
                    c.parent = merged.id;
                    ++cur_idx;
                } else {
                    break;
                }
            }
            h.clusters.push_back(merged);
            next.push_back(merged.id);
        }
        while (cur_idx < current.size()) next.push_back(current[cur_idx++]);
        current = std::move(next);
        h.stages.push_back(current);
    }

    h.c_infinity = current;

    // A cluster stays provisional while unseen lines beyond the window could be
    // merged into it. Influence propagates right-to-left: a cluster of mass m can
    // only take part in merges reaching at most L^m to its right.
    if (!opt.complete) {
        i64 danger = h.window_len;
        for (auto it = h.c_infinity.rbegin(); it != h.c_infinity.rend(); ++it) {
            Cluster& c = h.clusters[(std::size_t)*it];
            const i64 reach = pow_capped(h.L, c.mass, gap_cap);
            if (danger - c.omega() <= reach) {
                c.provisional = true;
                danger = c.alpha();
            }
        }
        // Propagate down the merge chains so stage-level views agree.
        for (auto& c : h.clusters) {
            if (c.parent >= 0) {
                const i64 top = h.top_ancestor(c.id);
                c.provisional = h.clusters[(std::size_t)top].provisional;
            }
        }
    }

    h.kappa.resize((std::size_t)n);
    h.maximal_cluster.resize((std::size_t)n);
    for (i64 id : h.c_infinity) {
        const Cluster& c = h.clusters[(std::size_t)id];
        for (i64 p = c.first_pt; p <= c.last_pt; ++p) {
            h.kappa[(std::size_t)p] = c.level;
            h.maximal_cluster[(std::size_t)p] = id;
        }
    }
    return h;
}

inline ClusterHierarchy build_hierarchy(const Environment& env, i64 k_max) {
    if (k_max < 1) throw std::invalid_argument("build_hierarchy: k_max must be >= 1");
    return build_hierarchy(env, BuildOptions{k_max, false});
}

// ---------------------------------------------------------------------------
// chi: smallest kk such that every maximal cluster of mass > kk starts at least
// L^mass away from the origin.
// ---------------------------------------------------------------------------

struct ChiValue {
    bool resolved = false;
    i64 value = 0;
};

inline ChiValue chi(const Environment& env, const ClusterHierarchy& h) {
    if (h.L != env.config.L || h.gamma != env.gamma)
        throw std::invalid_argument("chi: hierarchy was not built from this environment");
    ChiValue out;
    const i64 cap = env.config.window_len + 2;
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

// ---------------------------------------------------------------------------
// Genealogical trees
// ---------------------------------------------------------------------------

struct GenealogyNode {
    bool leaf = false;
    i64 value = 0;  // mass for a leaf, merge level for a branch node
    std::vector<i64> children;
};

struct GenealogyTree {
    std::vector<GenealogyNode> nodes;
    i64 root = -1;

    i64 leaves() const {
        i64 c = 0;
        for (auto& n : nodes) c += n.leaf ? 1 : 0;
        return c;
    }
    // mass identity: sum of leaf masses minus sum over branch nodes of (n_j-1)(l_j-1)
    i64 mass_identity() const {
        i64 v = 0;
        for (auto& n : nodes) {
            if (n.leaf)
                v += n.value;
            else
                v -= ((i64)n.children.size() - 1) * (n.value - 1);
        }
        return v;
    }
    i64 branch_degree_sum() const {  // sum of (n_j - 1)
        i64 v = 0;
        for (auto& n : nodes)
            if (!n.leaf) v += (i64)n.children.size() - 1;
        return v;
    }
    bool levels_strictly_decreasing() const {
        for (auto& n : nodes) {
            if (n.leaf) continue;
            for (i64 ch : n.children) {
                const auto& c = nodes[(std::size_t)ch];
                if (!c.leaf && c.value >= n.value) return false;
            }
        }
        return true;
    }
};

namespace detail {
inline i64 genealogy_rec(const ClusterHierarchy& h, i64 id, GenealogyTree& t) {
    const Cluster& c = h.clusters[(std::size_t)id];
    GenealogyNode node;
    if (c.level <= 1) {
        node.leaf = true;
        node.value = c.mass;
        t.nodes.push_back(node);
        return (i64)t.nodes.size() - 1;
    }
    node.leaf = false;
    node.value = c.level;
    const i64 me = (i64)t.nodes.size();
    t.nodes.push_back(node);
    for (i64 k : c.constituents) {
        const i64 ch = genealogy_rec(h, k, t);
        t.nodes[(std::size_t)me].children.push_back(ch);
    }
    return me;
}
}  // namespace detail

inline GenealogyTree genealogy(const ClusterHierarchy& h, i64 cluster_id) {
    if (cluster_id < 0 || cluster_id >= (i64)h.clusters.size())
        throw std::invalid_argument("genealogy: no such cluster");
    const Cluster& c = h.clusters[(std::size_t)cluster_id];
    if (c.level < 1) throw std::domain_error("genealogy: level-0 cluster has no tree");
    GenealogyTree t;
    t.root = detail::genealogy_rec(h, cluster_id, t);
    return t;
}

// ---------------------------------------------------------------------------
// Porous medium test (restricted configuration on [x1,x2])
// ---------------------------------------------------------------------------

inline bool porous_medium(const Environment& env, Interval iv, i64 level_k, i64 L) {
    if (iv.empty()) return true;
    Environment restricted;
    restricted.config = env.config;
    restricted.config.L = L;
    restricted.config.window_len = std::max(env.config.window_len, iv.hi + 1);
    for (i64 x : env.gamma)
        if (iv.contains(x)) restricted.gamma.push_back(x);
    if (restricted.gamma.empty()) return true;
    if (level_k == 0) return false;  // reduces to "no bad line inside"

    ClusterHierarchy h = build_hierarchy(restricted, BuildOptions{64, true});
    const i64 cap = restricted.config.window_len + 2;
    for (i64 id : h.c_infinity) {
        const Cluster& c = h.clusters[(std::size_t)id];
        if (c.mass > level_k) return false;
        const i64 need = pow_capped(L, c.mass, cap) - 1;
        if (c.alpha() - iv.lo < need) return false;
        if (iv.hi - c.omega() < need) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Descending decomposition
// ---------------------------------------------------------------------------

struct DescendingDecomposition {
    std::vector<std::pair<i64, i64>> pairs;  // (f_s, g_s)
    std::vector<i64> itinerary;              // strictly decreasing masses
};

namespace detail {
inline DescendingDecomposition descend(const ClusterHierarchy& h, i64 id) {
    const Cluster& c = h.clusters[(std::size_t)id];
    DescendingDecomposition out;
    if (c.level == 1) {
        // A level-1 run of mass m: dropping the last point leaves one cluster of mass m-1.
        out.pairs.push_back({c.alpha(), h.gamma[(std::size_t)(c.last_pt - 1)]});
        out.itinerary.push_back(c.mass - 1);
        return out;
    }
    const i64 r = (i64)c.constituents.size();
    const Cluster& last = h.clusters[(std::size_t)c.constituents[(std::size_t)(r - 1)]];
    i64 head_mass = 0;  // mass of the merge of the first r-1 constituents
    for (i64 q = 0; q + 1 < r; ++q) head_mass += h.clusters[(std::size_t)c.constituents[(std::size_t)q]].mass;
    head_mass -= (i64)(c.level - 1) * (r - 2);

    DescendingDecomposition sub = descend(h, last.id);
    if (head_mass == c.mass - 1) {
        const Cluster& prev = h.clusters[(std::size_t)c.constituents[(std::size_t)(r - 2)]];
        out.pairs.push_back({c.alpha(), prev.omega()});
        out.itinerary.push_back(c.mass - 1);
        for (std::size_t s = 0; s < sub.pairs.size(); ++s) {
            out.pairs.push_back(sub.pairs[s]);
            out.itinerary.push_back(sub.itinerary[s]);
        }
    } else {
        out.pairs.push_back({c.alpha(), sub.pairs[0].second});
        out.itinerary.push_back(c.mass - 1);
        for (std::size_t s = 1; s < sub.pairs.size(); ++s) {
            out.pairs.push_back(sub.pairs[s]);
            out.itinerary.push_back(sub.itinerary[s]);
        }
    }
    return out;
}
}  // namespace detail

inline DescendingDecomposition descending_decomposition(const ClusterHierarchy& h, i64 cluster_id) {
    if (cluster_id < 0 || cluster_id >= (i64)h.clusters.size())
        throw std::invalid_argument("descending_decomposition: no such cluster");
    const Cluster& c = h.clusters[(std::size_t)cluster_id];
    if (c.mass < 2) throw std::domain_error("descending_decomposition: mass must be >= 2");
    return detail::descend(h, cluster_id);
}

// ---------------------------------------------------------------------------
// Structural verification
// ---------------------------------------------------------------------------

inline VerificationReport verify_hierarchy(const Environment& env, const ClusterHierarchy& h) {
    VerificationReport rep;
    const i64 cap = h.window_len + 2;
    auto cname = [&](const Cluster& c) {
        return "cluster#" + std::to_string(c.id) + "(level=" + std::to_string(c.level) +
               ",mass=" + std::to_string(c.mass) + ",span=[" + std::to_string(c.span.lo) + "," +
               std::to_string(c.span.hi) + "])";
    };

    for (auto& c : h.clusters) {
        if (c.provisional) continue;
        if (c.mass < c.level + 1)
            rep.fail("mass-vs-level", cname(c), "mass must exceed level");
        if (c.level >= 1 && c.span.length() - 1 > 3 * pow_capped(h.L, c.mass - 1, cap))
            rep.fail("diameter-bound", cname(c), "diam > 3*L^(mass-1)");
        if (c.span.lo != h.gamma[(std::size_t)c.first_pt] || c.span.hi != h.gamma[(std::size_t)c.last_pt])
            rep.fail("span-endpoints", cname(c), "span endpoints must be gamma points");
        if (c.level >= 2) {
            if ((i64)c.constituents.size() < 2) {
                rep.fail("constituent-count", cname(c), "level >= 2 needs >= 2 constituents");
                continue;
            }
            i64 mass = 0, maxm = 0;
            for (i64 q : c.constituents) {
                mass += h.clusters[(std::size_t)q].mass;
                maxm = std::max(maxm, h.clusters[(std::size_t)q].mass);
            }
            mass -= (i64)(c.level - 1) * ((i64)c.constituents.size() - 1);
            if (mass != c.mass)
                rep.fail("mass-rule", cname(c), "mass != sum(constituents) - k(n-1)");
            if (c.mass < maxm + (i64)c.constituents.size() - 1)
                rep.fail("mass-growth", cname(c), "mass must exceed max constituent mass by n-1");
            if ((i64)c.constituents.size() > c.mass - c.level + 1)
                rep.fail("constituent-bound", cname(c), "more than mass-level+1 constituents");
            for (i64 q : c.constituents)
                if (h.clusters[(std::size_t)q].mass < c.level)
                    rep.fail("run-mass-floor", cname(c), "constituent mass below run level");
            // gaps between consecutive constituents are porous media of level-1
            for (std::size_t q = 0; q + 1 < c.constituents.size(); ++q) {
                const Cluster& a = h.clusters[(std::size_t)c.constituents[q]];
                const Cluster& b = h.clusters[(std::size_t)c.constituents[q + 1]];
                const i64 gap = b.alpha() - a.omega();
                if (gap >= pow_capped(h.L, c.level, cap))
                    rep.fail("run-gap", cname(c), "constituent gap >= L^level");
                if (!porous_medium(env, {a.omega() + 1, b.alpha() - 1}, c.level - 1, h.L))
                    rep.fail("porous-between-constituents", cname(c),
                             "gap between constituents is not porous of level-1");
            }
        } else if (c.level == 1) {
            if (c.mass != c.n_points())
                rep.fail("mass-rule", cname(c), "level-1 mass must equal cardinality");
            for (i64 p = c.first_pt; p + 1 <= c.last_pt; ++p)
                if (h.gamma[(std::size_t)p + 1] - h.gamma[(std::size_t)p] >= h.L)
                    rep.fail("run-gap", cname(c), "level-1 run gap >= L");
        }
    }

    // Partition and spacing properties per stage.
    for (std::size_t k = 0; k < h.stages.size(); ++k) {
        const auto& stage = h.stages[k];
        for (std::size_t j = 0; j + 1 < stage.size(); ++j) {
            const Cluster& a = h.clusters[(std::size_t)stage[j]];
            const Cluster& b = h.clusters[(std::size_t)stage[j + 1]];
            if (a.span.hi >= b.span.lo)
                rep.fail("span-disjoint", "stage " + std::to_string(k),
                         cname(a) + " overlaps " + cname(b));
        }
        for (i64 r = 1; r <= (i64)k; ++r) {
            const i64 need = pow_capped(h.L, r, cap);
            const Cluster* prev = nullptr;
            for (i64 id : stage) {
                const Cluster& c = h.clusters[(std::size_t)id];
                if (c.mass < r) continue;
                if (prev && !prev->provisional && !c.provisional &&
                    interval_distance(prev->span, c.span) < need)
                    rep.fail("spacing", "stage " + std::to_string(k),
                             cname(*prev) + " and " + cname(c) + " closer than L^" + std::to_string(r));
                prev = &c;
            }
        }
        // partition of gamma: point ranges tile [0, n)
        i64 expect = 0;
        for (i64 id : stage) {
            const Cluster& c = h.clusters[(std::size_t)id];
            if (c.first_pt != expect)
                rep.fail("partition", "stage " + std::to_string(k), cname(c) + " leaves a gap");
            expect = c.last_pt + 1;
        }
        if (expect != (i64)h.gamma.size())
            rep.fail("partition", "stage " + std::to_string(k), "stage does not cover gamma");
        // refinement: every cluster of stage k is contained in a stage-(k+1) cluster
        if (k + 1 < h.stages.size()) {
            const auto& up = h.stages[k + 1];
            std::size_t ui = 0;
            for (i64 id : stage) {
                const Cluster& c = h.clusters[(std::size_t)id];
                while (ui < up.size() && h.clusters[(std::size_t)up[ui]].span.hi < c.span.hi) ++ui;
                if (ui >= up.size() || !h.clusters[(std::size_t)up[ui]].span.contains(c.span))
                    rep.fail("refinement", "stage " + std::to_string(k),
                             cname(c) + " not contained in any stage-" + std::to_string(k + 1) + " cluster");
            }
        }
    }

    // spacing on the limit partition
    for (std::size_t j = 0; j + 1 < h.c_infinity.size(); ++j) {
        const Cluster& a = h.clusters[(std::size_t)h.c_infinity[j]];
        const Cluster& b = h.clusters[(std::size_t)h.c_infinity[j + 1]];
        if (a.provisional || b.provisional) continue;
        const i64 need = pow_capped(h.L, std::min(a.mass, b.mass), cap);
        if (interval_distance(a.span, b.span) < need)
            rep.fail("limit-spacing", "c_infinity", cname(a) + " and " + cname(b) + " too close");
    }
    // consecutive maximal clusters of mass >= k delimit porous media of level k-1
    i64 max_mass = 0;
    for (i64 id : h.c_infinity) max_mass = std::max(max_mass, h.clusters[(std::size_t)id].mass);
    for (i64 r = 1; r <= max_mass; ++r) {
        const Cluster* prev = nullptr;
        for (i64 id : h.c_infinity) {
            const Cluster& c = h.clusters[(std::size_t)id];
            if (c.mass < r) continue;
            if (prev && !prev->provisional && !c.provisional) {
                if (!porous_medium(env, {prev->omega() + 1, c.alpha() - 1}, r - 1, h.L))
                    rep.fail("porous-between-maximal", "mass>=" + std::to_string(r),
                             cname(*prev) + " .. " + cname(c));
            }
            prev = &c;
        }
    }

    // kappa agrees with the stored maximal clusters
    for (std::size_t p = 0; p < h.gamma.size(); ++p) {
        const Cluster& d = h.clusters[(std::size_t)h.maximal_cluster[p]];
        if (h.kappa[p] != d.level)
            rep.fail("kappa", "x=" + std::to_string(h.gamma[p]), "kappa != level of maximal cluster");
        if (!d.span.contains(h.gamma[p]))
            rep.fail("kappa", "x=" + std::to_string(h.gamma[p]), "maximal cluster does not contain x");
    }

    if (h.capped)
        for (auto& s : h.cap_notes) rep.note(s);
    return rep;
}

}  // namespace perc

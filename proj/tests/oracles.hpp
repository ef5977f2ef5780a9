#pragma once

// Brute-force reference computations, kept independent of the production
// code paths they check.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "treehaar/haar.hpp"
#include "treehaar/metric.hpp"
#include "treehaar/operators.hpp"

namespace oracles {

using namespace treehaar;

// LCA by intersecting full ancestor sets.
inline CubeId lca_brute(const DyadicTree& tree, std::uint32_t x, std::uint32_t y) {
    std::set<CubeId> ancestors;
    for (CubeId c = tree.leaf_cube(x); c != kInvalidCube; c = tree.cube(c).parent)
        ancestors.insert(c);
    for (CubeId c = tree.leaf_cube(y); c != kInvalidCube; c = tree.cube(c).parent)
        if (ancestors.count(c)) return c;
    return kInvalidCube;
}

inline double delta_brute(const DyadicTree& tree, std::uint32_t x, std::uint32_t y) {
    if (x == y) return 0.0;
    return tree.cube(lca_brute(tree, x, y)).measure;
}

// Closed delta-ball by scanning every leaf.
inline std::vector<std::uint32_t> ball_brute(const DyadicTree& tree, std::uint32_t x,
                                             double r) {
    std::vector<std::uint32_t> leaves;
    for (std::uint32_t y = 0; y < tree.leaf_count(); ++y)
        if (delta_brute(tree, x, y) <= r) leaves.push_back(y);
    return leaves;
}

// Inner product by direct leaf summation.
inline double dot_brute(const DyadicTree& tree, const LeafFunction& f,
                        const LeafFunction& g) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < tree.leaf_count(); ++i)
        s += f[i] * g[i] * tree.leaf_measure(i);
    return s;
}

// Haar coefficients by direct inner products against the leaf expansions.
inline HaarCoefficients analyze_brute(const DyadicTree& tree, const HaarSystem& system,
                                      const LeafFunction& f) {
    HaarCoefficients coeffs;
    coeffs.detail.resize(system.function_count());
    for (std::uint32_t id = 0; id < system.function_count(); ++id)
        coeffs.detail[id] = dot_brute(tree, f, haar_as_leaf_function(tree, system, id));
    LeafFunction scaling(tree.leaf_count(), system.scaling_value());
    coeffs.scaling = dot_brute(tree, f, scaling);
    return coeffs;
}

// The shift by its defining triple sum over cubes and functions.
inline LeafFunction petermichl_brute(const DyadicTree& tree, const HaarSystem& system,
                                     const AlphaSequence& alphas, const LeafFunction& f) {
    LeafFunction out(tree.leaf_count());
    for (CubeId q : tree.internal_cubes()) {
        const auto fns = system.functions_on(q);
        // sum over h with Q(h) = q of <f,h> * (alpha-weighted child functions)
        for (std::uint32_t k = 0; k < fns.size(); ++k) {
            const std::uint32_t id = system.first_function(q) + k;
            const LeafFunction h = haar_as_leaf_function(tree, system, id);
            const double c = dot_brute(tree, f, h);
            for (CubeId r : tree.cube(q).children) {
                const std::uint32_t b = system.first_function(r);
                const std::uint32_t e = b + system.count_on(r);
                for (std::uint32_t hid = b; hid < e; ++hid) {
                    const LeafFunction ht = haar_as_leaf_function(tree, system, hid);
                    for (std::uint32_t x = 0; x < out.size(); ++x)
                        out[x] += c * alphas.values[hid] * ht[x];
                }
            }
        }
    }
    return out;
}

// Dense matrix of a linear operator from its action on leaf indicators;
// M[x][y] such that (Af)(x) = sum_y M[x][y] f(y).
template <typename Apply>
std::vector<std::vector<double>> dense_matrix(const DyadicTree& tree, Apply&& apply) {
    const std::uint32_t n = tree.leaf_count();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::uint32_t y = 0; y < n; ++y) {
        LeafFunction e(n);
        e[y] = 1.0;
        const LeafFunction col = apply(e);
        for (std::uint32_t x = 0; x < n; ++x) m[x][y] = col[x];
    }
    return m;
}

// Haar-Lipschitz constant by scanning every (h, x, x') with x != x'.
inline double haar_lipschitz_brute(const DyadicTree& tree, const HaarSystem& system) {
    const std::uint32_t n = tree.leaf_count();
    double worst = 0.0;
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const LeafFunction h = haar_as_leaf_function(tree, system, id);
        const double mu = tree.cube(system.function(id).cube).measure;
        const double mu32 = std::pow(mu, 1.5);
        for (std::uint32_t x = 0; x < n; ++x)
            for (std::uint32_t xp = 0; xp < n; ++xp) {
                if (x == xp) continue;
                const double diff = std::abs(h[x] - h[xp]);
                if (diff == 0.0) continue;
                worst = std::max(worst, diff * mu32 / delta_brute(tree, x, xp));
            }
    }
    return worst;
}

// Symbol smoothness quotient by scanning all leaf pairs per function.
inline double symbol_bb_brute(const DyadicTree& tree, const HaarSystem& system,
                              const Symbol& symbol) {
    const std::uint32_t n = tree.leaf_count();
    double worst = 0.0;
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const double mu = tree.cube(system.function(id).cube).measure;
        for (std::uint32_t x = 0; x < n; ++x)
            for (std::uint32_t xp = x + 1; xp < n; ++xp) {
                const double diff = std::abs(symbol.value(tree, system, id, x) -
                                             symbol.value(tree, system, id, xp));
                if (diff == 0.0) continue;
                worst = std::max(worst, diff * mu / delta_brute(tree, x, xp));
            }
    }
    return worst;
}

inline double max_abs_diff(const LeafFunction& a, const LeafFunction& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace oracles

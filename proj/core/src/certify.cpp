#include "treehaar/certify.hpp"

#include <algorithm>
#include <cmath>

#include "treehaar/parallel.hpp"
#include "treehaar/rng.hpp"

namespace treehaar {

SizeReport size_constant(const DyadicTree& tree, const KernelMatrix& kernel) {
    const std::uint32_t n = tree.leaf_count();
    SizeReport report;
    if (n < 2) return report;
    const DeltaMatrix d = delta_matrix(tree);
    double best = -1.0;
    for (std::uint32_t x = 0; x < n; ++x)
        for (std::uint32_t y = 0; y < n; ++y) {
            if (x == y) continue;
            const double v = d(x, y) * std::abs(kernel(x, y));
            ++report.pairs;
            if (v > best) {
                best = v;
                report.x = x;
                report.y = y;
            }
        }
    report.c = std::max(best, 0.0);
    report.empty = report.pairs == 0;
    return report;
}

namespace {

struct SmoothAccum {
    double cx = 0.0, cy = 0.0;
    bool lemma_ok = true;
    std::uint32_t lx = 0, lxp = 0, ly = 0;
    std::size_t admissible = 0;
    // least squares for log(|dK| d(x,y)) = c + gamma log(d(x,x')/d(x,y))
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t fit_n = 0;

    void admit(const DeltaMatrix& d, const KernelMatrix& k, std::uint32_t x,
               std::uint32_t xp, std::uint32_t y) {
        const double dxy = d(x, y);
        const double dxxp = d(x, xp);
        ++admissible;
        if (d(xp, y) != dxy && lemma_ok) {
            lemma_ok = false;
            lx = x;
            lxp = xp;
            ly = y;
        }
        const double weight = dxy * dxy / dxxp;
        const double dk_x = std::abs(k(xp, y) - k(x, y));
        const double dk_y = std::abs(k(y, xp) - k(y, x));
        cx = std::max(cx, dk_x * weight);
        cy = std::max(cy, dk_y * weight);
        if (dk_x > 0.0) {
            const double lx_ = std::log(dxxp / dxy);
            const double ly_ = std::log(dk_x * dxy);
            sx += lx_;
            sy += ly_;
            sxx += lx_ * lx_;
            sxy += lx_ * ly_;
            ++fit_n;
        }
    }

    void merge(const SmoothAccum& o) {
        cx = std::max(cx, o.cx);
        cy = std::max(cy, o.cy);
        if (lemma_ok && !o.lemma_ok) {
            lemma_ok = false;
            lx = o.lx;
            lxp = o.lxp;
            ly = o.ly;
        }
        admissible += o.admissible;
        sx += o.sx;
        sy += o.sy;
        sxx += o.sxx;
        sxy += o.sxy;
        fit_n += o.fit_n;
    }
};

} // namespace

SmoothnessReport smoothness_constants(const DyadicTree& tree, const KernelMatrix& kernel,
                                      const CertifyLimits& limits) {
    const std::uint32_t n = tree.leaf_count();
    SmoothnessReport report;
    if (n < 3) return report;
    const DeltaMatrix d = delta_matrix(tree);

    SmoothAccum total;
    if (n <= limits.triple_scan_limit) {
        report.exhaustive = true;
        total = parallel_reduce<SmoothAccum>(
            n, SmoothAccum{},
            [&](std::size_t b, std::size_t e) {
                SmoothAccum acc;
                for (std::uint32_t x = static_cast<std::uint32_t>(b);
                     x < static_cast<std::uint32_t>(e); ++x)
                    for (std::uint32_t xp = 0; xp < n; ++xp) {
                        if (xp == x) continue;
                        const double dxxp = d(x, xp);
                        for (std::uint32_t y = 0; y < n; ++y) {
                            if (y == x || y == xp) continue;
                            if (2.0 * dxxp <= d(x, y)) acc.admit(d, kernel, x, xp, y);
                        }
                    }
                return acc;
            },
            [](SmoothAccum a, const SmoothAccum& b) {
                a.merge(b);
                return a;
            });
    } else {
        report.exhaustive = false;
        Rng rng = Rng(limits.seed).fork(0x57);
        std::size_t attempts = 0;
        const std::size_t max_attempts = 20 * limits.samples;
        while (total.admissible < limits.samples && attempts < max_attempts) {
            ++attempts;
            const auto x = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const auto xp = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const auto y = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            if (x == xp || y == x || y == xp) continue;
            if (2.0 * d(x, xp) <= d(x, y)) total.admit(d, kernel, x, xp, y);
        }
    }

    report.cx = total.cx;
    report.cy = total.cy;
    report.lemma_ok = total.lemma_ok;
    report.lemma_x = total.lx;
    report.lemma_xp = total.lxp;
    report.lemma_y = total.ly;
    report.admissible = total.admissible;
    report.empty = total.admissible == 0;
    if (total.fit_n >= 2) {
        const double nn = static_cast<double>(total.fit_n);
        const double denom = nn * total.sxx - total.sx * total.sx;
        if (std::abs(denom) > 1e-30)
            report.gamma_hat = (nn * total.sxy - total.sx * total.sy) / denom;
    }
    return report;
}

namespace {

// exact scan for symbols constant on grandchildren of each Q(h)
SymbolConditionReport grandchild_cell_scan(const DyadicTree& tree, const HaarSystem& system,
                                           const Symbol& symbol) {
    SymbolConditionReport report;
    report.ba = symbol.bound();
    report.exact = true;
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const CubeRecord& rec = tree.cube(system.function(id).cube);
        // cells: (child index, representative leaf, cell value)
        struct Cell {
            std::size_t child;
            double value;
        };
        std::vector<Cell> cells;
        for (std::size_t i = 0; i < rec.children.size(); ++i) {
            const CubeRecord& child = tree.cube(rec.children[i]);
            if (child.is_leaf()) {
                cells.push_back({i, symbol.value(tree, system, id, child.leaf_begin)});
            } else {
                for (CubeId g : child.children)
                    cells.push_back(
                        {i, symbol.value(tree, system, id, tree.cube(g).leaf_begin)});
            }
        }
        for (std::size_t a = 0; a < cells.size(); ++a) {
            for (std::size_t b = a + 1; b < cells.size(); ++b) {
                const double diff = std::abs(cells[a].value - cells[b].value);
                if (diff == 0.0) {
                    ++report.pairs;
                    continue;
                }
                const double lca_measure =
                    cells[a].child == cells[b].child
                        ? tree.cube(rec.children[cells[a].child]).measure
                        : rec.measure;
                report.bb = std::max(report.bb, diff * rec.measure / lca_measure);
                ++report.pairs;
            }
            // pair with a point outside Q(h): smallest delta is mu(parent)
            if (rec.parent != kInvalidCube) {
                report.bb = std::max(report.bb, std::abs(cells[a].value) * rec.measure /
                                                    tree.cube(rec.parent).measure);
                ++report.pairs;
            }
        }
    }
    report.empty = report.pairs == 0;
    return report;
}

} // namespace

SymbolConditionReport symbol_conditions(const DyadicTree& tree, const HaarSystem& system,
                                        const Symbol& symbol, const CertifyLimits& limits) {
    SymbolConditionReport report;
    if (symbol.kind() == Symbol::Kind::constant) {
        report.ba = symbol.bound();
        report.bb = 0.0; // eta does not depend on x
        report.exact = true;
        report.empty = system.function_count() == 0;
        report.pairs = system.function_count();
        return report;
    }
    if (symbol.piecewise_grandchild()) return grandchild_cell_scan(tree, system, symbol);

    report.ba = symbol.bound();
    const std::uint32_t n = tree.leaf_count();
    if (n <= limits.triple_scan_limit) {
        report.exact = true;
        for (std::uint32_t id = 0; id < system.function_count(); ++id) {
            const CubeRecord& rec = tree.cube(system.function(id).cube);
            for (std::uint32_t x = rec.leaf_begin; x < rec.leaf_end; ++x) {
                const double vx = symbol.value(tree, system, id, x);
                for (std::uint32_t xp = x + 1; xp < rec.leaf_end; ++xp) {
                    const double diff =
                        std::abs(vx - symbol.value(tree, system, id, xp));
                    if (diff > 0.0)
                        report.bb = std::max(
                            report.bb, diff * rec.measure / delta(tree, x, xp));
                    ++report.pairs;
                }
                if (rec.parent != kInvalidCube) {
                    report.bb = std::max(report.bb, std::abs(vx) * rec.measure /
                                                        tree.cube(rec.parent).measure);
                    ++report.pairs;
                }
            }
        }
    } else {
        report.exact = false;
        Rng rng = Rng(limits.seed).fork(0x5b);
        const std::uint32_t H = system.function_count();
        for (std::size_t i = 0; i < limits.samples; ++i) {
            const auto id = static_cast<std::uint32_t>(rng.next_int(0, H - 1));
            const CubeRecord& rec = tree.cube(system.function(id).cube);
            const auto x = static_cast<std::uint32_t>(
                rng.next_int(rec.leaf_begin, rec.leaf_end - 1));
            const auto xp =
                static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            if (x == xp) continue;
            const double diff = std::abs(symbol.value(tree, system, id, x) -
                                         symbol.value(tree, system, id, xp));
            if (diff > 0.0)
                report.bb =
                    std::max(report.bb, diff * rec.measure / delta(tree, x, xp));
            ++report.pairs;
        }
    }
    report.empty = report.pairs == 0;
    return report;
}

double symbol_ba_bound(const TreeStats& stats, const HaarCheck& haar, double alpha_sup) {
    const double m = static_cast<double>(stats.max_children);
    return m * m * alpha_sup * std::sqrt(stats.dyadic_doubling) * haar.c2 / haar.c1;
}

double symbol_bb_bound(const TreeStats& stats, const HaarCheck& haar, double alpha_sup) {
    const double m = static_cast<double>(stats.max_children);
    const double case3 = 2.0 * haar.c2 * (m - 1.0) *
                         std::pow(stats.dyadic_doubling, 1.5) * alpha_sup / haar.c1;
    const double case45 = 2.0 * symbol_ba_bound(stats, haar, alpha_sup);
    return std::max(case3, case45);
}

double weak_integral_identity(const DyadicTree& tree, const HaarSystem& system,
                              const Symbol& symbol, const KernelMatrix& kernel,
                              int trials, std::uint64_t seed) {
    const auto& internal = tree.internal_cubes();
    // find any disjoint pair up front
    bool any_disjoint = false;
    for (std::size_t i = 0; i < internal.size() && !any_disjoint; ++i)
        for (std::size_t j = i + 1; j < internal.size(); ++j) {
            const CubeRecord& a = tree.cube(internal[i]);
            const CubeRecord& b = tree.cube(internal[j]);
            if (a.leaf_end <= b.leaf_begin || b.leaf_end <= a.leaf_begin) {
                any_disjoint = true;
                break;
            }
        }
    if (!any_disjoint)
        throw Error("weak_integral_identity: no disjoint pair of branching cubes exists");

    Rng rng = Rng(seed).fork(0x3c);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        CubeId q1 = 0, q2 = 0;
        bool found = false;
        for (int attempt = 0; attempt < 256 && !found; ++attempt) {
            q1 = internal[static_cast<std::size_t>(
                rng.next_int(0, static_cast<std::int64_t>(internal.size()) - 1))];
            q2 = internal[static_cast<std::size_t>(
                rng.next_int(0, static_cast<std::int64_t>(internal.size()) - 1))];
            const CubeRecord& a = tree.cube(q1);
            const CubeRecord& b = tree.cube(q2);
            found = a.leaf_end <= b.leaf_begin || b.leaf_end <= a.leaf_begin;
        }
        if (!found) continue;

        auto random_span_function = [&](CubeId q) {
            HaarCoefficients coeffs;
            coeffs.scaling = 0.0;
            coeffs.detail.assign(system.function_count(), 0.0);
            const CubeRecord& rec = tree.cube(q);
            for (CubeId c : tree.internal_cubes()) {
                const CubeRecord& crec = tree.cube(c);
                if (crec.leaf_begin >= rec.leaf_begin && crec.leaf_end <= rec.leaf_end) {
                    const std::uint32_t b = system.first_function(c);
                    const std::uint32_t e = b + system.count_on(c);
                    for (std::uint32_t id = b; id < e; ++id)
                        coeffs.detail[id] = rng.next_uniform(-1.0, 1.0);
                }
            }
            LeafFunction f = synthesize(tree, system, coeffs);
            const double nf = norm2(tree, f);
            if (nf > 0.0)
                for (auto& v : f.values) v /= nf;
            return f;
        };

        const LeafFunction phi = random_span_function(q1);
        const LeafFunction psi = random_span_function(q2);
        const LeafFunction t_phi = apply_multiplier(tree, system, symbol, phi);
        const double lhs = dot(tree, t_phi, psi);

        const CubeRecord& a = tree.cube(q1);
        const CubeRecord& b = tree.cube(q2);
        double rhs = 0.0;
        for (std::uint32_t x = b.leaf_begin; x < b.leaf_end; ++x) {
            double inner = 0.0;
            for (std::uint32_t y = a.leaf_begin; y < a.leaf_end; ++y)
                inner += kernel(x, y) * phi[y] * tree.leaf_measure(y);
            rhs += psi[x] * inner * tree.leaf_measure(x);
        }
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

namespace {

double weak_ratio(const DyadicTree& tree, const LeafFunction& tf) {
    std::vector<std::pair<double, double>> level_mass;
    level_mass.reserve(tf.size());
    for (std::uint32_t i = 0; i < tf.size(); ++i)
        level_mass.emplace_back(std::abs(tf[i]), tree.leaf_measure(i));
    std::sort(level_mass.begin(), level_mass.end(),
              [](const auto& l, const auto& r) { return l.first > r.first; });
    double cum = 0.0, best = 0.0;
    for (const auto& [v, mu] : level_mass) {
        cum += mu;
        best = std::max(best, v * cum); // lambda just below v: mu{|Tf| > lambda} >= cum
    }
    return best;
}

} // namespace

double empirical_lp_probe(const DyadicTree& tree, const HaarSystem& system,
                          const Symbol& symbol, double p, int trials, std::uint64_t seed) {
    if (!(p > 1.0))
        throw Error("empirical_lp_probe requires p > 1 (weak-type regime is probed "
                    "by weak_11_probe)");
    Rng rng = Rng(seed).fork(0x19);
    const std::uint32_t n = tree.leaf_count();

    std::vector<LeafFunction> candidates;
    for (int t = 0; t < trials; ++t)
        candidates.push_back(random_leaf_function(tree, rng, true));
    // near-atoms: single-leaf indicators minus their means
    std::vector<std::uint32_t> atoms;
    if (n <= 128) {
        for (std::uint32_t i = 0; i < n; ++i) atoms.push_back(i);
    } else {
        for (int i = 0; i < 128; ++i)
            atoms.push_back(static_cast<std::uint32_t>(rng.next_int(0, n - 1)));
    }
    for (std::uint32_t leaf : atoms) {
        LeafFunction f(n);
        f[leaf] = 1.0;
        candidates.push_back(mean_zero(tree, f));
    }

    double best = 0.0;
    LeafFunction best_f;
    for (const auto& f : candidates) {
        const double nf = norm_p(tree, f, p);
        if (nf <= 0.0) continue;
        const double ratio = norm_p(tree, apply_multiplier(tree, system, symbol, f), p) / nf;
        if (ratio > best) {
            best = ratio;
            best_f = f;
        }
    }
    // refine the best candidate toward the top singular vector
    if (!best_f.values.empty()) {
        LeafFunction v = best_f;
        for (int round = 0; round < 6; ++round) {
            const double nv = norm2(tree, v);
            if (nv <= 0.0) break;
            for (auto& x : v.values) x /= nv;
            v = apply_multiplier_adjoint(tree, system, symbol,
                                         apply_multiplier(tree, system, symbol, v));
            const double np = norm_p(tree, v, p);
            if (np <= 0.0) break;
            const double ratio =
                norm_p(tree, apply_multiplier(tree, system, symbol, v), p) / np;
            best = std::max(best, ratio);
        }
    }
    return best;
}

double weak_11_probe(const DyadicTree& tree, const HaarSystem& system, const Symbol& symbol,
                     int trials, std::uint64_t seed) {
    Rng rng = Rng(seed).fork(0x11);
    const std::uint32_t n = tree.leaf_count();
    double best = 0.0;

    std::vector<std::uint32_t> atoms;
    if (n <= 128) {
        for (std::uint32_t i = 0; i < n; ++i) atoms.push_back(i);
    } else {
        for (int i = 0; i < 128; ++i)
            atoms.push_back(static_cast<std::uint32_t>(rng.next_int(0, n - 1)));
    }
    for (std::uint32_t leaf : atoms) {
        LeafFunction f(n);
        f[leaf] = 1.0 / tree.leaf_measure(leaf); // ||f||_1 = 1
        best = std::max(best,
                        weak_ratio(tree, apply_multiplier(tree, system, symbol, f)));
    }
    for (int t = 0; t < trials; ++t) {
        LeafFunction f = random_leaf_function(tree, rng, true);
        const double n1 = norm1(tree, f);
        if (n1 <= 0.0) continue;
        for (auto& v : f.values) v /= n1;
        best = std::max(best,
                        weak_ratio(tree, apply_multiplier(tree, system, symbol, f)));
    }
    return best;
}

std::vector<SweepRow> stability_sweep(
    const std::function<DyadicTree(int)>& builder, const std::vector<int>& depths,
    const std::function<Symbol(const DyadicTree&, const HaarSystem&)>& symbol_maker,
    std::uint64_t haar_seed, const CertifyLimits& limits, HaarStrategy strategy,
    double nonvanish_tol) {
    std::vector<SweepRow> rows;
    for (int depth : depths) {
        SweepRow row;
        row.depth = depth;
        const DyadicTree tree = builder(depth);
        row.leaves = tree.leaf_count();
        if (tree.leaf_count() > limits.dense_limit) {
            row.skipped = true;
            rows.push_back(row);
            continue;
        }
        const HaarSystem system = build_haar(tree, strategy, haar_seed, nonvanish_tol);
        const Symbol symbol = symbol_maker(tree, system);
        const KernelMatrix kernel = assemble_kernel(tree, system, symbol, limits.dense_limit);

        row.size_c = size_constant(tree, kernel).c;
        const SmoothnessReport smooth = smoothness_constants(tree, kernel, limits);
        row.smooth_cx = smooth.cx;
        row.smooth_cy = smooth.cy;
        row.gamma_hat = smooth.gamma_hat;
        row.smooth_empty = smooth.empty;
        const SymbolConditionReport cond = symbol_conditions(tree, system, symbol, limits);
        row.symbol_ba = cond.ba;
        row.symbol_bb = cond.bb;
        row.haar_lip = haar_lipschitz_constant(tree, system);
        row.growth_eps = tree_stats(tree).growth_eps;
        rows.push_back(row);
    }
    return rows;
}

double tail_variation(const std::vector<double>& column) {
    if (column.size() < 2) return 0.0;
    const double a = column[column.size() - 2];
    const double b = column.back();
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(b - a) / scale;
}

} // namespace treehaar

#include "treehaar/metric.hpp"

#include <algorithm>
#include <cmath>

#include "treehaar/parallel.hpp"
#include "treehaar/rng.hpp"

namespace treehaar {

CubeId smallest_common_cube(const DyadicTree& tree, std::uint32_t x, std::uint32_t y) {
    tree.require_leaf(x);
    tree.require_leaf(y);
    CubeId a = tree.leaf_cube(x);
    if (x == y) return a;
    CubeId b = tree.leaf_cube(y);
    while (tree.cube(a).level > tree.cube(b).level) a = tree.cube(a).parent;
    while (tree.cube(b).level > tree.cube(a).level) b = tree.cube(b).parent;
    while (a != b) {
        a = tree.cube(a).parent;
        b = tree.cube(b).parent;
    }
    return a;
}

double delta(const DyadicTree& tree, std::uint32_t x, std::uint32_t y) {
    if (x == y) {
        tree.require_leaf(x);
        return 0.0;
    }
    return tree.cube(smallest_common_cube(tree, x, y)).measure;
}

LeafRange ball(const DyadicTree& tree, std::uint32_t x, double r) {
    tree.require_leaf(x);
    CubeId q = tree.leaf_cube(x);
    if (tree.cube(q).measure > r) return {x, x + 1};
    while (tree.cube(q).parent != kInvalidCube &&
           tree.cube(tree.cube(q).parent).measure <= r)
        q = tree.cube(q).parent;
    return {tree.cube(q).leaf_begin, tree.cube(q).leaf_end};
}

DeltaMatrix delta_matrix(const DyadicTree& tree) {
    const std::uint32_t n = tree.leaf_count();
    std::vector<double> data(static_cast<std::size_t>(n) * n, 0.0);
    DeltaMatrix d(n, std::move(data));
    // pairs split across different children of Q get delta = mu(Q)
    for (CubeId q : tree.internal_cubes()) {
        const CubeRecord& rec = tree.cube(q);
        for (std::size_t i = 0; i + 1 < rec.children.size(); ++i) {
            const CubeRecord& a = tree.cube(rec.children[i]);
            for (std::size_t j = i + 1; j < rec.children.size(); ++j) {
                const CubeRecord& b = tree.cube(rec.children[j]);
                for (std::uint32_t x = a.leaf_begin; x < a.leaf_end; ++x)
                    for (std::uint32_t y = b.leaf_begin; y < b.leaf_end; ++y) {
                        d.at(x, y) = rec.measure;
                        d.at(y, x) = rec.measure;
                    }
            }
        }
    }
    return d;
}

namespace {

struct WorstTriple {
    double violation = -std::numeric_limits<double>::infinity();
    std::uint32_t x = 0, y = 0, z = 0;
    std::size_t checked = 0;
};

WorstTriple merge_worst(WorstTriple a, const WorstTriple& b) {
    a.checked += b.checked;
    if (b.violation > a.violation) {
        a.violation = b.violation;
        a.x = b.x;
        a.y = b.y;
        a.z = b.z;
    }
    return a;
}

} // namespace

UltrametricReport check_ultrametric(const DeltaMatrix& d, ScanMode mode,
                                    std::uint64_t seed, std::size_t samples) {
    const std::uint32_t n = d.size();
    UltrametricReport report;
    if (n < 3) return report;

    WorstTriple worst;
    if (mode == ScanMode::exhaustive) {
        worst = parallel_reduce<WorstTriple>(
            n, WorstTriple{},
            [&](std::size_t b, std::size_t e) {
                WorstTriple local;
                for (std::uint32_t x = static_cast<std::uint32_t>(b);
                     x < static_cast<std::uint32_t>(e); ++x) {
                    for (std::uint32_t y = 0; y < n; ++y) {
                        const double dxy = d(x, y);
                        for (std::uint32_t z = 0; z < n; ++z) {
                            const double v = dxy - std::max(d(x, z), d(z, y));
                            ++local.checked;
                            if (v > local.violation) {
                                local.violation = v;
                                local.x = x;
                                local.y = y;
                                local.z = z;
                            }
                        }
                    }
                }
                return local;
            },
            merge_worst);
    } else {
        Rng rng(seed);
        worst.checked = samples;
        for (std::size_t i = 0; i < samples; ++i) {
            const auto x = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const auto y = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const auto z = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const double v = d(x, y) - std::max(d(x, z), d(z, y));
            if (v > worst.violation) {
                worst.violation = v;
                worst.x = x;
                worst.y = y;
                worst.z = z;
            }
        }
    }

    report.triples_checked = worst.checked;
    report.x = worst.x;
    report.y = worst.y;
    report.z = worst.z;
    report.violation = std::max(0.0, worst.violation);
    report.pass = !(worst.violation > 0.0);
    return report;
}

UltrametricReport verify_ultrametric(const DyadicTree& tree, ScanMode mode,
                                     std::uint64_t seed, std::size_t samples) {
    if (mode == ScanMode::exhaustive && tree.leaf_count() > 4096)
        throw Error("exhaustive ultrametric scan limited to 4096 leaves; use sampled mode");
    if (mode == ScanMode::sampled) {
        // direct delta queries, no dense table
        const std::uint32_t n = tree.leaf_count();
        UltrametricReport report;
        if (n < 3) return report;
        Rng rng(seed);
        report.triples_checked = samples;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < samples; ++i) {
            const auto x = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const auto y = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const auto z = static_cast<std::uint32_t>(rng.next_int(0, n - 1));
            const double v =
                delta(tree, x, y) - std::max(delta(tree, x, z), delta(tree, z, y));
            if (v > worst) {
                worst = v;
                report.x = x;
                report.y = y;
                report.z = z;
            }
        }
        report.violation = std::max(0.0, worst);
        report.pass = !(worst > 0.0);
        return report;
    }
    return check_ultrametric(delta_matrix(tree), mode, seed, samples);
}

NormalityReport verify_normal(const DyadicTree& tree) {
    NormalityReport report;
    const std::uint32_t n = tree.leaf_count();
    if (n == 0) return report;

    double min_branching = tree.total_measure();
    for (CubeId q : tree.internal_cubes())
        min_branching = std::min(min_branching, tree.cube(q).measure);

    std::vector<double> radii;
    radii.reserve(3 * tree.cube_count());
    const double total = tree.total_measure();
    for (CubeId q = 0; q < tree.cube_count(); ++q) {
        const double m = tree.cube(q).measure;
        for (double r : {std::nextafter(m, 0.0), m, std::nextafter(m, total)})
            if (r <= total) radii.push_back(r);
    }
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

    report.sup_ratio = 0.0;
    report.inf_ratio = std::numeric_limits<double>::infinity();
    report.r_min = min_branching;
    report.r_max = total;

    for (std::uint32_t x = 0; x < n; ++x) {
        const double resolution = std::max(min_branching, tree.leaf_measure(x));
        for (double r : radii) {
            if (r < resolution) continue;
            const LeafRange b = ball(tree, x, r);
            double mass = 0.0;
            // ball must be the span of the cube found by walking up from x
            CubeId q = tree.leaf_cube(x);
            while (tree.cube(q).parent != kInvalidCube &&
                   tree.cube(tree.cube(q).parent).measure <= r)
                q = tree.cube(q).parent;
            if (LeafRange{tree.cube(q).leaf_begin, tree.cube(q).leaf_end} != b)
                report.ball_equals_cube = false;
            mass = tree.cube(q).measure;
            const double ratio = mass / r;
            report.sup_ratio = std::max(report.sup_ratio, ratio);
            report.inf_ratio = std::min(report.inf_ratio, ratio);
            ++report.pairs_checked;
        }
    }
    if (report.pairs_checked == 0) {
        report.inf_ratio = 0.0;
    }
    return report;
}

double char_lipschitz_constant(const DyadicTree& tree) {
    // |chi_Q(x) - chi_Q(y)| is 1 exactly when the pair straddles the cube
    // boundary; then delta(x,y) >= mu(parent(Q)), with equality attainable.
    double worst = 0.0;
    for (CubeId q = 0; q < tree.cube_count(); ++q) {
        const CubeRecord& rec = tree.cube(q);
        if (rec.parent == kInvalidCube) continue; // root straddles nothing
        worst = std::max(worst, rec.measure / tree.cube(rec.parent).measure);
    }
    return worst;
}

} // namespace treehaar

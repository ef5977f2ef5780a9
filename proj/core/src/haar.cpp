#include "treehaar/haar.hpp"

#include <algorithm>
#include <cmath>

#include "treehaar/rng.hpp"

#include <nlohmann/json.hpp>

namespace treehaar {

namespace {

// Weighted nested split basis: function k is supported on children 0..k,
// constant on 0..k-1 and opposite-signed on child k. Orthonormal in L^2(mu)
// and orthogonal to constants; rows k < m-2 have zeros past child k.
std::vector<std::vector<double>> helmert_base(const std::vector<double>& mu) {
    const std::size_t m = mu.size();
    std::vector<double> prefix(m, 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        prefix[i] = s;
        s += mu[i];
    }
    std::vector<std::vector<double>> rows(m - 1, std::vector<double>(m, 0.0));
    for (std::size_t k = 1; k < m; ++k) {
        const double sk = prefix[k];
        const double a = std::sqrt(mu[k] / (sk * (sk + mu[k])));
        const double b = std::sqrt(sk / (mu[k] * (sk + mu[k])));
        for (std::size_t i = 0; i < k; ++i) rows[k - 1][i] = a;
        rows[k - 1][k] = -b;
    }
    return rows;
}

// Random orthogonal (m-1)x(m-1) via modified Gram-Schmidt on a Gaussian
// draw, diagonal signs fixed positive. Returns false on a degenerate draw.
bool random_orthogonal(Rng& rng, std::size_t d, std::vector<std::vector<double>>& q) {
    q.assign(d, std::vector<double>(d));
    for (auto& row : q)
        for (auto& v : row) v = rng.next_normal();
    // orthonormalize rows
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double proj = 0.0;
            for (std::size_t k = 0; k < d; ++k) proj += q[i][k] * q[j][k];
            for (std::size_t k = 0; k < d; ++k) q[i][k] -= proj * q[j][k];
        }
        double norm = 0.0;
        for (std::size_t k = 0; k < d; ++k) norm += q[i][k] * q[i][k];
        norm = std::sqrt(norm);
        if (norm < 1e-8) return false;
        const double sign = q[i][i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < d; ++k) q[i][k] *= sign / norm;
    }
    return true;
}

double min_relative_value(const std::vector<std::vector<double>>& rows) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& row : rows) {
        double mx = 0.0;
        for (double v : row) mx = std::max(mx, std::abs(v));
        for (double v : row) worst = std::min(worst, std::abs(v) / mx);
    }
    return worst;
}

} // namespace

HaarSystem build_haar(const DyadicTree& tree, HaarStrategy strategy, std::uint64_t seed,
                      double nonvanish_tol) {
    HaarSystem::Parts parts;
    parts.first_fn.assign(tree.cube_count() + 1, 0);
    parts.scaling_value = 1.0 / std::sqrt(tree.total_measure());

    const Rng master(seed);
    for (CubeId q = 0; q < tree.cube_count(); ++q) {
        parts.first_fn[q] = static_cast<std::uint32_t>(parts.functions.size());
        const CubeRecord& rec = tree.cube(q);
        if (rec.is_leaf()) continue;
        const std::size_t m = rec.children.size();
        std::vector<double> mu(m);
        for (std::size_t i = 0; i < m; ++i) mu[i] = tree.cube(rec.children[i]).measure;

        std::vector<std::vector<double>> rows = helmert_base(mu);
        if (m == 2) {
            // classical function, positive on the first child
            if (rows[0][0] < 0.0)
                for (auto& v : rows[0]) v = -v;
        } else if (strategy == HaarStrategy::rotated_helmert) {
            Rng rng = master.fork(q);
            const std::size_t d = m - 1;
            std::vector<std::vector<double>> best_rows;
            double best = -1.0;
            bool accepted = false;
            std::vector<std::vector<double>> o;
            for (int attempt = 0; attempt < 64; ++attempt) {
                if (!random_orthogonal(rng, d, o)) continue;
                std::vector<std::vector<double>> rotated(d, std::vector<double>(m, 0.0));
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                        const double w = o[i][j];
                        if (w == 0.0) continue;
                        for (std::size_t k = 0; k < m; ++k)
                            rotated[i][k] += w * rows[j][k];
                    }
                const double rel = min_relative_value(rotated);
                if (rel > best) {
                    best = rel;
                    best_rows = rotated;
                }
                if (rel >= nonvanish_tol) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
                throw HaarError(q, best,
                                "haar construction: retry budget exhausted on cube " +
                                    std::to_string(q) + " (best relative child value " +
                                    std::to_string(best) + " < tolerance " +
                                    std::to_string(nonvanish_tol) + ")");
            rows = std::move(best_rows);
        } else {
            // classical_binary on a wider cube: the triangular basis has
            // structural zeros, which the nonvanishing requirement forbids
            throw HaarError(q, 0.0,
                            "haar construction: classical-binary strategy cannot "
                            "satisfy the nonvanishing requirement on cube " +
                                std::to_string(q) + " with " + std::to_string(m) +
                                " children; use rotated-helmert");
        }

        for (std::uint32_t i = 0; i < rows.size(); ++i) {
            HaarFunction h;
            h.cube = q;
            h.index_within_cube = i;
            h.child_values = std::move(rows[i]);
            parts.functions.push_back(std::move(h));
        }
    }
    parts.first_fn[tree.cube_count()] = static_cast<std::uint32_t>(parts.functions.size());
    return HaarSystem(std::move(parts));
}

HaarCoefficients analyze(const DyadicTree& tree, const HaarSystem& system,
                         const LeafFunction& f) {
    require_size(tree, f);
    const std::uint32_t n_cubes = tree.cube_count();
    std::vector<double> cube_integral(n_cubes, 0.0);
    // preorder ids: children after parents, so a reverse sweep is bottom-up
    for (CubeId q = n_cubes; q-- > 0;) {
        const CubeRecord& rec = tree.cube(q);
        if (rec.is_leaf()) {
            cube_integral[q] = f[rec.leaf_begin] * tree.leaf_measure(rec.leaf_begin);
        } else {
            double s = 0.0;
            for (CubeId c : rec.children) s += cube_integral[c];
            cube_integral[q] = s;
        }
    }

    HaarCoefficients coeffs;
    coeffs.detail.assign(system.function_count(), 0.0);
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const HaarFunction& h = system.function(id);
        const CubeRecord& rec = tree.cube(h.cube);
        double s = 0.0;
        for (std::size_t i = 0; i < rec.children.size(); ++i)
            s += h.child_values[i] * cube_integral[rec.children[i]];
        coeffs.detail[id] = s;
    }
    coeffs.scaling = cube_integral[tree.root()] * system.scaling_value();
    return coeffs;
}

LeafFunction synthesize(const DyadicTree& tree, const HaarSystem& system,
                        const HaarCoefficients& coeffs) {
    if (coeffs.detail.size() != system.function_count())
        throw Error("synthesize: coefficient count " + std::to_string(coeffs.detail.size()) +
                    " != function count " + std::to_string(system.function_count()));
    const std::uint32_t n_cubes = tree.cube_count();
    std::vector<double> acc(n_cubes, 0.0);
    acc[tree.root()] = coeffs.scaling * system.scaling_value();
    LeafFunction f(tree.leaf_count());
    for (CubeId q = 0; q < n_cubes; ++q) {
        const CubeRecord& rec = tree.cube(q);
        if (rec.is_leaf()) {
            f[rec.leaf_begin] = acc[q];
            continue;
        }
        const auto fns = system.functions_on(q);
        for (std::size_t i = 0; i < rec.children.size(); ++i) {
            double a = acc[q];
            for (std::size_t k = 0; k < fns.size(); ++k)
                a += coeffs.detail[system.first_function(q) + k] * fns[k].child_values[i];
            acc[rec.children[i]] = a;
        }
    }
    return f;
}

LeafFunction haar_as_leaf_function(const DyadicTree& tree, const HaarSystem& system,
                                   std::uint32_t function_id) {
    const HaarFunction& h = system.function(function_id);
    const CubeRecord& rec = tree.cube(h.cube);
    LeafFunction f(tree.leaf_count());
    for (std::size_t i = 0; i < rec.children.size(); ++i) {
        const CubeRecord& child = tree.cube(rec.children[i]);
        for (std::uint32_t x = child.leaf_begin; x < child.leaf_end; ++x)
            f[x] = h.child_values[i];
    }
    return f;
}

HaarCheck verify_haar(const DyadicTree& tree, const HaarSystem& system,
                      std::uint32_t global_gram_leaf_limit) {
    HaarCheck check;
    check.c1 = std::numeric_limits<double>::infinity();

    for (CubeId q : tree.internal_cubes()) {
        const CubeRecord& rec = tree.cube(q);
        const auto fns = system.functions_on(q);
        const std::size_t m = rec.children.size();
        if (fns.size() != m - 1) {
            check.counts_ok = false;
            continue;
        }
        const double sqrt_mu = std::sqrt(rec.measure);
        for (const HaarFunction& h : fns) {
            if (h.child_values.size() != m) {
                check.support_ok = false;
                continue;
            }
            double mean = 0.0, norm = 0.0;
            std::size_t nonzero = 0;
            double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double v = h.child_values[i];
                const double mu_i = tree.cube(rec.children[i]).measure;
                mean += v * mu_i;
                norm += v * v * mu_i;
                if (v != 0.0) ++nonzero;
                vmin = std::min(vmin, std::abs(v));
                vmax = std::max(vmax, std::abs(v));
            }
            check.max_mean_residual = std::max(check.max_mean_residual, std::abs(mean));
            check.max_norm_residual = std::max(check.max_norm_residual, std::abs(norm - 1.0));
            // support must straddle children: >= 2 nonzero values, nonconstant
            if (nonzero < 2) check.support_ok = false;
            bool constant = true;
            for (std::size_t i = 1; i < m; ++i)
                if (h.child_values[i] != h.child_values[0]) constant = false;
            if (constant) check.support_ok = false;
            check.c1 = std::min(check.c1, vmin * sqrt_mu);
            check.c2 = std::max(check.c2, vmax * sqrt_mu);
        }
    }

    // orthonormality: either the full Gram against every basis function, or
    // per-cube blocks when the tree is too large
    const std::uint32_t H = system.function_count();
    if (tree.leaf_count() <= global_gram_leaf_limit) {
        check.gram_global = true;
        for (std::uint32_t id = 0; id < H; ++id) {
            const HaarCoefficients row =
                analyze(tree, system, haar_as_leaf_function(tree, system, id));
            for (std::uint32_t j = 0; j < H; ++j) {
                const double expected = (j == id) ? 1.0 : 0.0;
                check.max_gram_residual =
                    std::max(check.max_gram_residual, std::abs(row.detail[j] - expected));
            }
            check.max_gram_residual =
                std::max(check.max_gram_residual, std::abs(row.scaling));
        }
        // scaling row
        LeafFunction scaling(tree.leaf_count(), system.scaling_value());
        const HaarCoefficients row = analyze(tree, system, scaling);
        for (std::uint32_t j = 0; j < H; ++j)
            check.max_gram_residual = std::max(check.max_gram_residual, std::abs(row.detail[j]));
        check.max_gram_residual =
            std::max(check.max_gram_residual, std::abs(row.scaling - 1.0));
    } else {
        for (CubeId q : tree.internal_cubes()) {
            const CubeRecord& rec = tree.cube(q);
            const auto fns = system.functions_on(q);
            for (std::size_t a = 0; a < fns.size(); ++a)
                for (std::size_t b = a; b < fns.size(); ++b) {
                    double g = 0.0;
                    for (std::size_t i = 0; i < rec.children.size(); ++i)
                        g += fns[a].child_values[i] * fns[b].child_values[i] *
                             tree.cube(rec.children[i]).measure;
                    const double expected = (a == b) ? 1.0 : 0.0;
                    check.max_gram_residual =
                        std::max(check.max_gram_residual, std::abs(g - expected));
                }
        }
    }

    if (system.function_count() == 0) check.c1 = 0.0;
    check.h5_constant = check.c1 > 0.0 ? check.c2 / check.c1 : 0.0;
    check.pass = check.counts_ok && check.support_ok && check.c1 > 0.0 &&
                 check.max_mean_residual <= 1e-12 && check.max_gram_residual <= 1e-10;
    return check;
}

double haar_lipschitz_constant(const DyadicTree& tree, const HaarSystem& system) {
    double worst = 0.0;
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const HaarFunction& h = system.function(id);
        const CubeRecord& rec = tree.cube(h.cube);
        const double mu32 = std::pow(rec.measure, 1.5);
        // pairs in different children: delta = mu(Q(h))
        double dmax = 0.0, vmax = 0.0;
        for (std::size_t i = 0; i < h.child_values.size(); ++i) {
            vmax = std::max(vmax, std::abs(h.child_values[i]));
            for (std::size_t j = i + 1; j < h.child_values.size(); ++j)
                dmax = std::max(dmax, std::abs(h.child_values[i] - h.child_values[j]));
        }
        worst = std::max(worst, dmax * mu32 / rec.measure);
        // one endpoint outside Q(h): smallest delta is mu(parent)
        if (rec.parent != kInvalidCube)
            worst = std::max(worst, vmax * mu32 / tree.cube(rec.parent).measure);
    }
    return worst;
}

std::string haar_to_json_text(const DyadicTree& tree, const HaarSystem& system) {
    nlohmann::ordered_json j;
    j["scaling"] = system.scaling_value();
    j["leaf_count"] = tree.leaf_count();
    j["functions"] = nlohmann::ordered_json::array();
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const HaarFunction& h = system.function(id);
        nlohmann::ordered_json e;
        e["cube"] = h.cube;
        e["index"] = h.index_within_cube;
        e["values"] = h.child_values;
        j["functions"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

} // namespace treehaar

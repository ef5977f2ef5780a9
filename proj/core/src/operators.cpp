#include "treehaar/operators.hpp"

#include <algorithm>
#include <cmath>

#include "treehaar/parallel.hpp"
#include "treehaar/rng.hpp"

#include <nlohmann/json.hpp>

namespace treehaar {

namespace {

// (cube, child slot holding the query leaf) for every ancestor, root first.
struct AncestorChain {
    CubeId cubes[64];
    std::uint32_t slots[64];
    int length = 0;
};

AncestorChain ancestor_chain(const DyadicTree& tree, std::uint32_t leaf) {
    AncestorChain chain;
    CubeId c = tree.leaf_cube(leaf);
    CubeId tmp_cubes[64];
    std::uint32_t tmp_slots[64];
    int k = 0;
    while (tree.cube(c).parent != kInvalidCube) {
        tmp_cubes[k] = tree.cube(c).parent;
        tmp_slots[k] = tree.cube(c).pos_in_parent;
        c = tree.cube(c).parent;
        ++k;
    }
    chain.length = k;
    for (int i = 0; i < k; ++i) {
        chain.cubes[i] = tmp_cubes[k - 1 - i];
        chain.slots[i] = tmp_slots[k - 1 - i];
    }
    return chain;
}

void require_symbol(const HaarSystem& system, const Symbol& symbol) {
    if (symbol.function_count() != system.function_count())
        throw Error("symbol entry count " + std::to_string(symbol.function_count()) +
                    " does not match the Haar system (" +
                    std::to_string(system.function_count()) + " functions)");
}

void require_alphas(const HaarSystem& system, const AlphaSequence& alphas) {
    if (alphas.values.size() != system.function_count())
        throw Error("alpha sequence has " + std::to_string(alphas.values.size()) +
                    " entries, expected " + std::to_string(system.function_count()));
}

// S(Q) = sum of detail coefficients on cube Q, indexed by cube id.
std::vector<double> cube_coefficient_sums(const DyadicTree& tree, const HaarSystem& system,
                                          const std::vector<double>& detail) {
    std::vector<double> sums(tree.cube_count(), 0.0);
    for (CubeId q : tree.internal_cubes()) {
        const std::uint32_t b = system.first_function(q);
        const std::uint32_t e = b + system.count_on(q);
        double s = 0.0;
        for (std::uint32_t id = b; id < e; ++id) s += detail[id];
        sums[q] = s;
    }
    return sums;
}

std::vector<double> shift_coefficients(const DyadicTree& tree, const HaarSystem& system,
                                       const AlphaSequence& alphas,
                                       const std::vector<double>& detail) {
    std::vector<double> sums = cube_coefficient_sums(tree, system, detail);
    std::vector<double> out(detail.size(), 0.0);
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const CubeId cube = system.function(id).cube;
        const CubeId parent = tree.cube(cube).parent;
        if (parent == kInvalidCube) continue; // nothing above the root
        out[id] = alphas.values[id] * sums[parent];
    }
    return out;
}

std::vector<double> shift_adjoint_coefficients(const DyadicTree& tree,
                                               const HaarSystem& system,
                                               const AlphaSequence& alphas,
                                               const std::vector<double>& detail) {
    std::vector<double> out(detail.size(), 0.0);
    for (CubeId q : tree.internal_cubes()) {
        double s = 0.0;
        for (CubeId r : tree.cube(q).children) {
            const std::uint32_t b = system.first_function(r);
            const std::uint32_t e = b + system.count_on(r);
            for (std::uint32_t id = b; id < e; ++id) s += alphas.values[id] * detail[id];
        }
        const std::uint32_t b = system.first_function(q);
        const std::uint32_t e = b + system.count_on(q);
        for (std::uint32_t id = b; id < e; ++id) out[id] = s;
    }
    return out;
}

} // namespace

Symbol Symbol::constant(std::vector<double> per_function) {
    Symbol s;
    s.kind_ = Kind::constant;
    for (double v : per_function)
        if (!std::isfinite(v)) throw Error("constant symbol has a non-finite entry");
    s.constants_ = std::move(per_function);
    s.bound_ = 0.0;
    for (double v : s.constants_) s.bound_ = std::max(s.bound_, std::abs(v));
    return s;
}

Symbol Symbol::variable(const DyadicTree& tree, const HaarSystem& system,
                        std::vector<std::vector<double>> values, bool piecewise_grandchild) {
    if (values.size() != system.function_count())
        throw Error("variable symbol needs one value block per Haar function");
    Symbol s;
    s.kind_ = Kind::variable;
    s.piecewise_grandchild_ = piecewise_grandchild;
    s.offsets_.assign(values.size() + 1, 0);
    std::size_t total = 0;
    for (std::uint32_t id = 0; id < values.size(); ++id) {
        const CubeRecord& rec = tree.cube(system.function(id).cube);
        if (values[id].size() != rec.leaf_count())
            throw Error("variable symbol block for function " + std::to_string(id) +
                        " must cover exactly the leaves of its cube");
        s.offsets_[id] = total;
        total += values[id].size();
    }
    s.offsets_[values.size()] = total;
    s.variable_.reserve(total);
    for (const auto& block : values)
        for (double v : block) {
            if (!std::isfinite(v)) throw Error("variable symbol has a non-finite entry");
            s.variable_.push_back(v);
        }
    s.bound_ = 0.0;
    for (double v : s.variable_) s.bound_ = std::max(s.bound_, std::abs(v));
    return s;
}

AlphaSequence alphas_plus_minus(const DyadicTree& tree, const HaarSystem& system) {
    AlphaSequence a;
    a.values.resize(system.function_count());
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const CubeRecord& rec = tree.cube(system.function(id).cube);
        const bool even = rec.parent == kInvalidCube || rec.pos_in_parent % 2 == 0;
        a.values[id] = even ? 1.0 : -1.0;
    }
    a.sup = a.values.empty() ? 0.0 : 1.0;
    return a;
}

AlphaSequence alphas_ones(const HaarSystem& system) {
    AlphaSequence a;
    a.values.assign(system.function_count(), 1.0);
    a.sup = a.values.empty() ? 0.0 : 1.0;
    return a;
}

AlphaSequence alphas_random(const HaarSystem& system, std::uint64_t seed) {
    AlphaSequence a;
    a.values.resize(system.function_count());
    Rng rng = Rng(seed).fork(0xa1fa);
    for (auto& v : a.values) v = rng.next_uniform(-1.0, 1.0);
    for (double v : a.values) a.sup = std::max(a.sup, std::abs(v));
    return a;
}

LeafFunction apply_multiplier(const DyadicTree& tree, const HaarSystem& system,
                              const Symbol& symbol, const LeafFunction& f) {
    require_size(tree, f);
    require_symbol(system, symbol);
    HaarCoefficients coeffs = analyze(tree, system, f);
    if (symbol.kind() == Symbol::Kind::constant) {
        for (std::uint32_t id = 0; id < coeffs.detail.size(); ++id)
            coeffs.detail[id] *= symbol.constant_value(id);
        coeffs.scaling = 0.0;
        return synthesize(tree, system, coeffs);
    }
    const std::uint32_t n = tree.leaf_count();
    LeafFunction out(n);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::uint32_t x = static_cast<std::uint32_t>(b);
             x < static_cast<std::uint32_t>(e); ++x) {
            const AncestorChain chain = ancestor_chain(tree, x);
            double acc = 0.0;
            for (int i = 0; i < chain.length; ++i) {
                const CubeId q = chain.cubes[i];
                const std::uint32_t slot = chain.slots[i];
                const auto fns = system.functions_on(q);
                const std::uint32_t base = system.first_function(q);
                for (std::uint32_t k = 0; k < fns.size(); ++k) {
                    const double hx = fns[k].child_values[slot];
                    acc += symbol.value(tree, system, base + k, x) * coeffs.detail[base + k] * hx;
                }
            }
            out[x] = acc;
        }
    });
    return out;
}

LeafFunction apply_multiplier_adjoint(const DyadicTree& tree, const HaarSystem& system,
                                      const Symbol& symbol, const LeafFunction& f) {
    require_size(tree, f);
    require_symbol(system, symbol);
    if (symbol.kind() == Symbol::Kind::constant) {
        return apply_multiplier(tree, system, symbol, f); // diagonal, self-adjoint
    }
    HaarCoefficients coeffs;
    coeffs.scaling = 0.0;
    coeffs.detail.assign(system.function_count(), 0.0);
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const HaarFunction& h = system.function(id);
        const CubeRecord& rec = tree.cube(h.cube);
        double s = 0.0;
        for (std::size_t i = 0; i < rec.children.size(); ++i) {
            const CubeRecord& child = tree.cube(rec.children[i]);
            const double hv = h.child_values[i];
            for (std::uint32_t x = child.leaf_begin; x < child.leaf_end; ++x)
                s += f[x] * symbol.value(tree, system, id, x) * hv * tree.leaf_measure(x);
        }
        coeffs.detail[id] = s;
    }
    return synthesize(tree, system, coeffs);
}

KernelMatrix assemble_kernel(const DyadicTree& tree, const HaarSystem& system,
                             const Symbol& symbol, std::uint32_t dense_limit) {
    require_symbol(system, symbol);
    const std::uint32_t n = tree.leaf_count();
    if (n > dense_limit)
        throw Error("dense kernel limited to " + std::to_string(dense_limit) +
                    " leaves, tree has " + std::to_string(n));
    KernelMatrix K;
    K.n = n;
    K.entries.assign(static_cast<std::size_t>(n) * n, 0.0);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::uint32_t x = static_cast<std::uint32_t>(b);
             x < static_cast<std::uint32_t>(e); ++x) {
            double* row = &K.entries[static_cast<std::size_t>(x) * n];
            const AncestorChain chain = ancestor_chain(tree, x);
            for (int i = 0; i < chain.length; ++i) {
                const CubeId q = chain.cubes[i];
                const std::uint32_t slot = chain.slots[i];
                const CubeRecord& rec = tree.cube(q);
                const auto fns = system.functions_on(q);
                const std::uint32_t base = system.first_function(q);
                for (std::uint32_t k = 0; k < fns.size(); ++k) {
                    const double factor =
                        symbol.value(tree, system, base + k, x) * fns[k].child_values[slot];
                    if (factor == 0.0) continue;
                    for (std::size_t j = 0; j < rec.children.size(); ++j) {
                        const CubeRecord& child = tree.cube(rec.children[j]);
                        const double v = factor * fns[k].child_values[j];
                        for (std::uint32_t y = child.leaf_begin; y < child.leaf_end; ++y)
                            row[y] += v;
                    }
                }
            }
        }
    });
    return K;
}

LeafFunction petermichl_apply(const DyadicTree& tree, const HaarSystem& system,
                              const AlphaSequence& alphas, const LeafFunction& f) {
    require_size(tree, f);
    require_alphas(system, alphas);
    HaarCoefficients coeffs = analyze(tree, system, f);
    coeffs.detail = shift_coefficients(tree, system, alphas, coeffs.detail);
    coeffs.scaling = 0.0;
    return synthesize(tree, system, coeffs);
}

LeafFunction petermichl_adjoint_apply(const DyadicTree& tree, const HaarSystem& system,
                                      const AlphaSequence& alphas, const LeafFunction& f) {
    require_size(tree, f);
    require_alphas(system, alphas);
    HaarCoefficients coeffs = analyze(tree, system, f);
    coeffs.detail = shift_adjoint_coefficients(tree, system, alphas, coeffs.detail);
    coeffs.scaling = 0.0;
    return synthesize(tree, system, coeffs);
}

ComposeReport petermichl_compose_diag(const DyadicTree& tree, const HaarSystem& system,
                                      const AlphaSequence& alphas) {
    require_alphas(system, alphas);
    const std::uint32_t H = system.function_count();
    if (H > 8192)
        throw Error("petermichl_compose_diag limited to 8192 Haar functions");

    ComposeReport report;
    report.diag.assign(tree.cube_count(), 0.0);
    report.formula.assign(tree.cube_count(), 0.0);

    report.unimodular = H > 0;
    for (double a : alphas.values)
        if (std::abs(std::abs(a) - 1.0) > 1e-12) report.unimodular = false;

    for (CubeId q : tree.internal_cubes()) {
        double s = 0.0;
        for (CubeId r : tree.cube(q).children) {
            const std::uint32_t b = system.first_function(r);
            const std::uint32_t e = b + system.count_on(r);
            for (std::uint32_t id = b; id < e; ++id)
                s += alphas.values[id] * alphas.values[id];
        }
        report.formula[q] = s;
    }

    // one column of P*P per basis vector
    std::vector<double> basis(H, 0.0);
    for (std::uint32_t h = 0; h < H; ++h) {
        basis.assign(H, 0.0);
        basis[h] = 1.0;
        std::vector<double> col = shift_adjoint_coefficients(
            tree, system, alphas, shift_coefficients(tree, system, alphas, basis));
        const CubeId qh = system.function(h).cube;
        if (system.function(h).index_within_cube == 0) report.diag[qh] = col[h];
        for (std::uint32_t g = 0; g < H; ++g) {
            const CubeId qg = system.function(g).cube;
            const double model = (qg == qh) ? report.formula[qh] : 0.0;
            report.structure_residual =
                std::max(report.structure_residual, std::abs(col[g] - model));
            if (qg != qh)
                report.offblock_residual =
                    std::max(report.offblock_residual, std::abs(col[g]));
        }
    }

    const TreeStats stats = tree_stats(tree);
    const double m2 = static_cast<double>(stats.max_children) * stats.max_children;
    for (CubeId q : tree.internal_cubes()) {
        report.formula_residual =
            std::max(report.formula_residual, std::abs(report.diag[q] - report.formula[q]));
        // interior = has at least one internal child
        bool interior = false;
        for (CubeId r : tree.cube(q).children)
            if (!tree.cube(r).is_leaf()) interior = true;
        if (interior && report.unimodular) {
            if (report.diag[q] < 1.0 - 1e-12 || report.diag[q] > m2 + 1e-12)
                report.bracket_ok = false;
        }
    }
    return report;
}

Symbol petermichl_symbol(const DyadicTree& tree, const HaarSystem& system,
                         const AlphaSequence& alphas) {
    require_alphas(system, alphas);
    std::vector<std::vector<double>> blocks(system.function_count());
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const HaarFunction& h = system.function(id);
        const CubeRecord& rec = tree.cube(h.cube);
        std::vector<double> block(rec.leaf_count(), 0.0);
        for (std::size_t i = 0; i < rec.children.size(); ++i) {
            const CubeId r = rec.children[i];
            const CubeRecord& child = tree.cube(r);
            if (child.is_leaf()) continue; // H(R) empty
            const double hr = h.child_values[i];
            const auto fns = system.functions_on(r);
            const std::uint32_t base = system.first_function(r);
            for (std::size_t g = 0; g < child.children.size(); ++g) {
                const CubeRecord& grand = tree.cube(child.children[g]);
                double v = 0.0;
                for (std::uint32_t k = 0; k < fns.size(); ++k)
                    v += alphas.values[base + k] * fns[k].child_values[g];
                v /= hr;
                for (std::uint32_t x = grand.leaf_begin; x < grand.leaf_end; ++x)
                    block[x - rec.leaf_begin] = v;
            }
        }
        blocks[id] = std::move(block);
    }
    return Symbol::variable(tree, system, std::move(blocks), /*piecewise_grandchild=*/true);
}

Symbol petermichl_classic_symbol(const DyadicTree& tree, const HaarSystem& system) {
    for (CubeId q : tree.internal_cubes())
        if (tree.cube(q).children.size() != 2)
            throw Error("classic Petermichl symbol requires an all-binary tree (cube " +
                        std::to_string(q) + " has " +
                        std::to_string(tree.cube(q).children.size()) + " children)");
    std::vector<std::vector<double>> blocks(system.function_count());
    for (std::uint32_t id = 0; id < system.function_count(); ++id) {
        const HaarFunction& h = system.function(id);
        const CubeRecord& rec = tree.cube(h.cube);
        std::vector<double> block(rec.leaf_count(), 0.0);
        for (std::size_t i = 0; i < 2; ++i) {
            const CubeRecord& child = tree.cube(rec.children[i]);
            if (child.is_leaf()) continue;
            for (std::size_t g = 0; g < 2; ++g) {
                const CubeRecord& grand = tree.cube(child.children[g]);
                const double v = (g == 0) ? 1.0 : -1.0;
                for (std::uint32_t x = grand.leaf_begin; x < grand.leaf_end; ++x)
                    block[x - rec.leaf_begin] = v;
            }
        }
        blocks[id] = std::move(block);
    }
    return Symbol::variable(tree, system, std::move(blocks), /*piecewise_grandchild=*/true);
}

KernelMatrix petermichl_kernel(const DyadicTree& tree, const HaarSystem& system,
                               const AlphaSequence& alphas, std::uint32_t dense_limit) {
    require_alphas(system, alphas);
    const std::uint32_t n = tree.leaf_count();
    if (n > dense_limit)
        throw Error("dense kernel limited to " + std::to_string(dense_limit) +
                    " leaves, tree has " + std::to_string(n));
    KernelMatrix N;
    N.n = n;
    N.entries.assign(static_cast<std::size_t>(n) * n, 0.0);

    std::vector<double> g_col(n), s_col(n);
    for (CubeId q : tree.internal_cubes()) {
        const CubeRecord& rec = tree.cube(q);
        // s_Q(y): sum of the functions on Q
        // g_Q(x): alpha-weighted sum of the functions one level down
        std::fill(s_col.begin() + rec.leaf_begin, s_col.begin() + rec.leaf_end, 0.0);
        std::fill(g_col.begin() + rec.leaf_begin, g_col.begin() + rec.leaf_end, 0.0);
        const auto fns = system.functions_on(q);
        for (std::size_t i = 0; i < rec.children.size(); ++i) {
            const CubeRecord& child = tree.cube(rec.children[i]);
            double s = 0.0;
            for (const auto& h : fns) s += h.child_values[i];
            for (std::uint32_t y = child.leaf_begin; y < child.leaf_end; ++y) s_col[y] = s;
            if (child.is_leaf()) continue;
            const auto child_fns = system.functions_on(rec.children[i]);
            const std::uint32_t base = system.first_function(rec.children[i]);
            for (std::size_t g = 0; g < child.children.size(); ++g) {
                const CubeRecord& grand = tree.cube(child.children[g]);
                double v = 0.0;
                for (std::uint32_t k = 0; k < child_fns.size(); ++k)
                    v += alphas.values[base + k] * child_fns[k].child_values[g];
                for (std::uint32_t x = grand.leaf_begin; x < grand.leaf_end; ++x) g_col[x] = v;
            }
        }
        for (std::uint32_t x = rec.leaf_begin; x < rec.leaf_end; ++x) {
            const double gx = g_col[x];
            if (gx == 0.0) continue;
            double* row = &N.entries[static_cast<std::size_t>(x) * n];
            for (std::uint32_t y = rec.leaf_begin; y < rec.leaf_end; ++y)
                row[y] += gx * s_col[y];
        }
    }
    return N;
}

double l2_norm_estimate(const DyadicTree& tree, const HaarSystem& system,
                        const Symbol& symbol, int iterations, std::uint64_t seed) {
    if (iterations < 1) throw Error("l2_norm_estimate: iterations must be >= 1");
    require_symbol(system, symbol);
    Rng rng = Rng(seed).fork(0x12);
    LeafFunction v = random_leaf_function(tree, rng, /*project_mean_zero=*/true);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const double nv = norm2(tree, v);
        if (nv < 1e-300) return 0.0;
        for (auto& x : v.values) x /= nv;
        const LeafFunction w = apply_multiplier(tree, system, symbol, v);
        lambda = dot(tree, w, w);
        if (lambda < 1e-300) return 0.0;
        v = apply_multiplier_adjoint(tree, system, symbol, w);
    }
    return std::sqrt(lambda);
}

namespace {

using json = nlohmann::ordered_json;

json parse_text(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const std::exception& e) {
        throw Error(std::string(what) + " parse failure: " + e.what());
    }
}

// entry -> global function id
std::uint32_t entry_function_id(const DyadicTree& tree, const HaarSystem& system,
                                const json& e) {
    const CubeId cube = e.at("cube").get<CubeId>();
    const auto index = e.at("index").get<std::uint32_t>();
    if (cube >= tree.cube_count())
        throw Error("symbol/alpha entry: cube " + std::to_string(cube) + " out of range");
    if (index >= system.count_on(cube))
        throw Error("symbol/alpha entry: cube " + std::to_string(cube) + " has " +
                    std::to_string(system.count_on(cube)) + " functions, index " +
                    std::to_string(index) + " invalid");
    return system.first_function(cube) + index;
}

} // namespace

AlphaSequence alphas_from_json_text(const DyadicTree& tree, const HaarSystem& system,
                                    const std::string& text) {
    const json j = parse_text(text, "alpha file");
    AlphaSequence a;
    const double fill = j.value("default", 0.0);
    a.values.assign(system.function_count(), fill);
    if (!j.contains("default") && !j.contains("entries"))
        throw Error("alpha file needs a default or entries");
    if (j.contains("entries")) {
        std::vector<bool> seen(system.function_count(), j.contains("default"));
        for (const auto& e : j.at("entries")) {
            const std::uint32_t id = entry_function_id(tree, system, e);
            a.values[id] = e.at("value").get<double>();
            seen[id] = true;
        }
        for (std::uint32_t id = 0; id < seen.size(); ++id)
            if (!seen[id])
                throw Error("alpha file missing an entry for function " + std::to_string(id) +
                            " (cube " + std::to_string(system.function(id).cube) + ")");
    }
    for (double v : a.values) {
        if (!std::isfinite(v)) throw Error("alpha file has a non-finite value");
        a.sup = std::max(a.sup, std::abs(v));
    }
    return a;
}

Symbol symbol_from_json_text(const DyadicTree& tree, const HaarSystem& system,
                             const std::string& text) {
    const json j = parse_text(text, "symbol file");
    const std::string kind = j.value("kind", "constant");
    if (kind == "constant") {
        std::vector<double> values(system.function_count(), j.value("default", 0.0));
        if (!j.contains("default") && !j.contains("entries"))
            throw Error("constant symbol needs a default or entries");
        if (j.contains("entries")) {
            std::vector<bool> seen(system.function_count(), j.contains("default"));
            for (const auto& e : j.at("entries")) {
                const std::uint32_t id = entry_function_id(tree, system, e);
                values[id] = e.at("value").get<double>();
                seen[id] = true;
            }
            for (std::uint32_t id = 0; id < seen.size(); ++id)
                if (!seen[id])
                    throw Error("symbol missing an entry for function " + std::to_string(id));
        }
        return Symbol::constant(std::move(values));
    }
    if (kind == "variable") {
        std::vector<std::vector<double>> blocks(system.function_count());
        std::vector<bool> seen(system.function_count(), false);
        for (const auto& e : j.at("entries")) {
            const std::uint32_t id = entry_function_id(tree, system, e);
            blocks[id] = e.at("values").get<std::vector<double>>();
            seen[id] = true;
        }
        for (std::uint32_t id = 0; id < seen.size(); ++id)
            if (!seen[id])
                throw Error("symbol missing an entry for function " + std::to_string(id));
        return Symbol::variable(tree, system, std::move(blocks));
    }
    throw Error("symbol kind must be constant or variable, got " + kind);
}

} // namespace treehaar

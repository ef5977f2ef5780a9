#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "treehaar/operators.hpp"
#include "treehaar/rng.hpp"

#ifdef TREEHAAR_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace treehaar;

namespace {

Symbol ones_symbol(const HaarSystem& system) {
    return Symbol::constant(std::vector<double>(system.function_count(), 1.0));
}

Symbol zero_symbol(const HaarSystem& system) {
    return Symbol::constant(std::vector<double>(system.function_count(), 0.0));
}

LeafFunction kernel_apply(const DyadicTree& tree, const KernelMatrix& k,
                          const LeafFunction& f) {
    LeafFunction out(tree.leaf_count());
    for (std::uint32_t x = 0; x < tree.leaf_count(); ++x) {
        double s = 0.0;
        for (std::uint32_t y = 0; y < tree.leaf_count(); ++y)
            s += k(x, y) * f[y] * tree.leaf_measure(y);
        out[x] = s;
    }
    return out;
}

#ifdef TREEHAAR_HAVE_EIGEN
// operator norm on L^2(mu) of the dense matrix M with (Af)(x) = sum_y M[x][y] f(y)
double spectral_norm_mu(const DyadicTree& tree,
                        const std::vector<std::vector<double>>& m) {
    const auto n = static_cast<Eigen::Index>(tree.leaf_count());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) {
            const double sx = std::sqrt(tree.leaf_measure(static_cast<std::uint32_t>(x)));
            const double sy = std::sqrt(tree.leaf_measure(static_cast<std::uint32_t>(y)));
            a(x, y) = sx * m[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] / sy;
        }
    return a.jacobiSvd().singularValues()(0);
}
#endif

} // namespace

TEST_CASE("unit constant symbol acts as identity on the Haar span") {
    const DyadicTree tree = build_uniform(3, 2);
    const HaarSystem system = build_haar(tree);
    Rng rng(1);

    const LeafFunction f = random_leaf_function(tree, rng, /*mean_zero=*/true);
    const LeafFunction tf = apply_multiplier(tree, system, ones_symbol(system), f);
    CHECK(oracles::max_abs_diff(tf, f) <= 1e-10);

    // with a mean component, the scaling part is annihilated
    const LeafFunction g = random_leaf_function(tree, rng);
    const LeafFunction tg = apply_multiplier(tree, system, ones_symbol(system), g);
    CHECK(oracles::max_abs_diff(tg, mean_zero(tree, g)) <= 1e-10);

    const LeafFunction z = apply_multiplier(tree, system, zero_symbol(system), g);
    for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("symbol entry count must match the system") {
    const DyadicTree tree = build_uniform(2, 2);
    const HaarSystem system = build_haar(tree);
    const Symbol bad = Symbol::constant({1.0});
    LeafFunction f(tree.leaf_count(), 1.0);
    CHECK_THROWS_AS(static_cast<void>(apply_multiplier(tree, system, bad, f)), Error);
}

TEST_CASE("kernel of the unit symbol on the depth-3 Lebesgue tree") {
    const DyadicTree tree = build_uniform(3, 2);
    const HaarSystem system = build_haar(tree);
    const KernelMatrix k = assemble_kernel(tree, system, ones_symbol(system));

    for (std::uint32_t x = 0; x < 8; ++x)
        CHECK(k(x, x) == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(k(0, 7) == doctest::Approx(-1.0).epsilon(1e-12));
    // reproducing-minus-mean structure: every off-diagonal entry is -1
    for (std::uint32_t x = 0; x < 8; ++x)
        for (std::uint32_t y = 0; y < 8; ++y)
            if (x != y) CHECK(k(x, y) == doctest::Approx(-1.0).epsilon(1e-12));

    const KernelMatrix z = assemble_kernel(tree, system, zero_symbol(system));
    for (double v : z.entries) CHECK(v == 0.0);
}

TEST_CASE("operator application equals dense kernel action") {
    Rng rng(7);
    for (std::uint64_t seed : {1ull, 2ull}) {
        const DyadicTree tree = build_random(seed, 4, 2, 3, {}, 0.1);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);

        // constant symbol: +1 on root-level functions, -1 elsewhere
        std::vector<double> values(system.function_count(), -1.0);
        for (std::uint32_t k = 0; k < system.count_on(tree.root()); ++k)
            values[system.first_function(tree.root()) + k] = 1.0;
        const Symbol mixed = Symbol::constant(std::move(values));

        const KernelMatrix k = assemble_kernel(tree, system, mixed);
        for (int trial = 0; trial < 5; ++trial) {
            const LeafFunction f = random_leaf_function(tree, rng, true);
            CHECK(oracles::max_abs_diff(apply_multiplier(tree, system, mixed, f),
                                        kernel_apply(tree, k, f)) <= 1e-10);
        }

        // variable symbol: the generalized shift symbol
        const AlphaSequence alphas = alphas_plus_minus(tree, system);
        const Symbol eta = petermichl_symbol(tree, system, alphas);
        const KernelMatrix kp = assemble_kernel(tree, system, eta);
        for (int trial = 0; trial < 5; ++trial) {
            const LeafFunction f = random_leaf_function(tree, rng);
            CHECK(oracles::max_abs_diff(apply_multiplier(tree, system, eta, f),
                                        kernel_apply(tree, kp, f)) <= 1e-10);
        }
    }
}

TEST_CASE("shift moves the root coefficient onto signed child functions") {
    const DyadicTree tree = build_uniform(3, 2);
    const HaarSystem system = build_haar(tree);
    const AlphaSequence alphas = alphas_plus_minus(tree, system);

    const LeafFunction f = haar_as_leaf_function(tree, system, system.first_function(tree.root()));
    const LeafFunction pf = petermichl_apply(tree, system, alphas, f);

    CubeId left = tree.cube(tree.root()).children[0];
    CubeId right = tree.cube(tree.root()).children[1];
    LeafFunction expected = haar_as_leaf_function(tree, system, system.first_function(left));
    const LeafFunction hr = haar_as_leaf_function(tree, system, system.first_function(right));
    for (std::uint32_t i = 0; i < expected.size(); ++i) expected[i] -= hr[i];
    CHECK(oracles::max_abs_diff(pf, expected) <= 1e-12);

    // constants are annihilated
    const LeafFunction c(tree.leaf_count(), 3.0);
    for (double v : petermichl_apply(tree, system, alphas, c).values)
        CHECK(std::abs(v) <= 1e-12);

    // the deepest scale is annihilated: no functions below it
    CubeId deepest = 0;
    for (CubeId q : tree.internal_cubes())
        if (tree.cube(q).level == 2) deepest = q;
    const LeafFunction hd = haar_as_leaf_function(tree, system, system.first_function(deepest));
    for (double v : petermichl_apply(tree, system, alphas, hd).values)
        CHECK(std::abs(v) <= 1e-12);

    // adjoint mirrors it: P*(h_left - h_right) = 2 h_root
    const LeafFunction pstar = petermichl_adjoint_apply(tree, system, alphas, expected);
    LeafFunction two_root =
        haar_as_leaf_function(tree, system, system.first_function(tree.root()));
    for (auto& v : two_root.values) v *= 2.0;
    CHECK(oracles::max_abs_diff(pstar, two_root) <= 1e-12);
}

TEST_CASE("shift equals its defining triple sum on random trees") {
    Rng rng(3);
    for (std::uint64_t seed : {3ull, 4ull}) {
        const DyadicTree tree = build_random(seed, 3, 2, 4, {}, 0.2);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);
        const AlphaSequence alphas = alphas_random(system, seed);
        for (int trial = 0; trial < 3; ++trial) {
            const LeafFunction f = random_leaf_function(tree, rng);
            CHECK(oracles::max_abs_diff(
                      petermichl_apply(tree, system, alphas, f),
                      oracles::petermichl_brute(tree, system, alphas, f)) <= 1e-11);
        }
    }
}

TEST_CASE("adjoint identity <Pf,g> = <f,P*g>") {
    Rng rng(17);
    for (std::uint64_t seed : {5ull, 6ull}) {
        const DyadicTree tree = build_random(seed, 4, 2, 3, {}, 0.15);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);
        const AlphaSequence alphas = alphas_random(system, seed + 100);
        for (int trial = 0; trial < 10; ++trial) {
            const LeafFunction f = random_leaf_function(tree, rng, true);
            const LeafFunction g = random_leaf_function(tree, rng, true);
            const double lhs = dot(tree, petermichl_apply(tree, system, alphas, f), g);
            const double rhs = dot(tree, f, petermichl_adjoint_apply(tree, system, alphas, g));
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
    }
}

TEST_CASE("P P* is one-sided: 2x projection, not 2x identity") {
    const DyadicTree tree = build_uniform(3, 2);
    const HaarSystem system = build_haar(tree);
    const AlphaSequence alphas = alphas_plus_minus(tree, system);

    // PP* h_left = h_left - h_right: the symmetric combination is annihilated
    CubeId left = tree.cube(tree.root()).children[0];
    CubeId right = tree.cube(tree.root()).children[1];
    const LeafFunction hl = haar_as_leaf_function(tree, system, system.first_function(left));
    const LeafFunction hr = haar_as_leaf_function(tree, system, system.first_function(right));

    const LeafFunction pp = petermichl_apply(tree, system, alphas,
                                             petermichl_adjoint_apply(tree, system, alphas, hl));
    LeafFunction expected = hl;
    for (std::uint32_t i = 0; i < expected.size(); ++i) expected[i] -= hr[i];
    CHECK(oracles::max_abs_diff(pp, expected) <= 1e-12);

    // but PP* = 2I on the range of P
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        HaarCoefficients coeffs;
        coeffs.detail.assign(system.function_count(), 0.0);
        for (CubeId q : tree.internal_cubes()) {
            bool interior = false;
            for (CubeId r : tree.cube(q).children)
                if (!tree.cube(r).is_leaf()) interior = true;
            if (!interior) continue;
            const std::uint32_t b = system.first_function(q);
            for (std::uint32_t k = 0; k < system.count_on(q); ++k)
                coeffs.detail[b + k] = rng.next_uniform(-1.0, 1.0);
        }
        const LeafFunction f = synthesize(tree, system, coeffs);
        const LeafFunction pf = petermichl_apply(tree, system, alphas, f);
        const LeafFunction ppstar_pf = petermichl_apply(
            tree, system, alphas, petermichl_adjoint_apply(tree, system, alphas, pf));
        LeafFunction two_pf = pf;
        for (auto& v : two_pf.values) v *= 2.0;
        CHECK(oracles::max_abs_diff(ppstar_pf, two_pf) <= 1e-11);
    }
}

TEST_CASE("composition diagonal: binary 2, ternary 6, with block structure") {
    {
        const DyadicTree tree = build_uniform(4, 2);
        const HaarSystem system = build_haar(tree);
        const ComposeReport report =
            petermichl_compose_diag(tree, system, alphas_plus_minus(tree, system));
        CHECK(report.unimodular);
        CHECK(report.bracket_ok);
        CHECK(report.structure_residual <= 1e-12);
        CHECK(report.offblock_residual <= 1e-12);
        CHECK(report.formula_residual <= 1e-12);
        for (CubeId q : tree.internal_cubes()) {
            const bool interior = tree.cube(q).level <= tree.depth() - 2;
            CHECK(report.diag[q] == doctest::Approx(interior ? 2.0 : 0.0).epsilon(1e-12));
        }
    }
    {
        const DyadicTree tree = build_uniform(3, 3);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, 11);
        const ComposeReport report =
            petermichl_compose_diag(tree, system, alphas_plus_minus(tree, system));
        CHECK(report.unimodular);
        CHECK(report.bracket_ok);
        CHECK(report.structure_residual <= 1e-12);
        for (CubeId q : tree.internal_cubes()) {
            const bool interior = tree.cube(q).level <= tree.depth() - 2;
            CHECK(report.diag[q] == doctest::Approx(interior ? 6.0 : 0.0).epsilon(1e-12));
        }
    }
    {
        const DyadicTree tree = build_uniform(2, 2);
        const HaarSystem system = build_haar(tree);
        AlphaSequence zero;
        zero.values.assign(system.function_count(), 0.0);
        const ComposeReport report = petermichl_compose_diag(tree, system, zero);
        CHECK_FALSE(report.unimodular);
        for (double c : report.diag) CHECK(c == 0.0);
    }
}

TEST_CASE("composition matches the dense two-route oracle") {
    // [P*P]_{g,h} = <Ph, Pg> computed from the brute-force shift
    for (std::uint64_t seed : {8ull}) {
        const DyadicTree tree = build_random(seed, 3, 2, 3, {}, 0.0);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);
        const AlphaSequence alphas = alphas_random(system, seed);
        const ComposeReport report = petermichl_compose_diag(tree, system, alphas);

        for (std::uint32_t h = 0; h < system.function_count(); ++h) {
            const LeafFunction ph = oracles::petermichl_brute(
                tree, system, alphas, haar_as_leaf_function(tree, system, h));
            for (std::uint32_t g = 0; g < system.function_count(); ++g) {
                const LeafFunction pg = oracles::petermichl_brute(
                    tree, system, alphas, haar_as_leaf_function(tree, system, g));
                const double entry = oracles::dot_brute(tree, ph, pg);
                const double model = system.function(h).cube == system.function(g).cube
                                         ? report.formula[system.function(h).cube]
                                         : 0.0;
                CHECK(entry == doctest::Approx(model).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("generalized symbol satisfies eta(x,h) h(x) = alpha-weighted child sum") {
    for (std::uint64_t seed : {9ull, 10ull}) {
        const DyadicTree tree = build_random(seed, 3, 2, 4, {}, 0.1);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);
        const AlphaSequence alphas = alphas_plus_minus(tree, system);
        const Symbol eta = petermichl_symbol(tree, system, alphas);

        for (std::uint32_t id = 0; id < system.function_count(); ++id) {
            const CubeRecord& rec = tree.cube(system.function(id).cube);
            const LeafFunction h = haar_as_leaf_function(tree, system, id);
            // rhs: sum over child cubes R, functions on R of alpha h~(x)
            LeafFunction rhs(tree.leaf_count());
            for (CubeId r : rec.children) {
                const std::uint32_t b = system.first_function(r);
                for (std::uint32_t k = 0; k < system.count_on(r); ++k) {
                    const LeafFunction ht = haar_as_leaf_function(tree, system, b + k);
                    for (std::uint32_t x = 0; x < rhs.size(); ++x)
                        rhs[x] += alphas.values[b + k] * ht[x];
                }
            }
            for (std::uint32_t x = 0; x < tree.leaf_count(); ++x) {
                const double lhs = eta.value(tree, system, id, x) * h[x];
                CHECK(std::abs(lhs - rhs[x]) <= 1e-12);
            }
            // support convention: zero outside Q(h)
            for (std::uint32_t x = 0; x < tree.leaf_count(); ++x)
                if (x < rec.leaf_begin || x >= rec.leaf_end)
                    CHECK(eta.value(tree, system, id, x) == 0.0);
        }
    }
}

TEST_CASE("multiplier route equals shift route") {
    Rng rng(31);
    for (std::uint64_t seed : {11ull, 12ull}) {
        const DyadicTree tree = build_random(seed, 4, 2, 3, {}, 0.15);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);
        const AlphaSequence alphas = alphas_plus_minus(tree, system);
        const Symbol eta = petermichl_symbol(tree, system, alphas);
        for (int trial = 0; trial < 10; ++trial) {
            const LeafFunction f = random_leaf_function(tree, rng);
            CHECK(oracles::max_abs_diff(apply_multiplier(tree, system, eta, f),
                                        petermichl_apply(tree, system, alphas, f)) <= 1e-10);
        }
    }
}

TEST_CASE("binary Lebesgue symbol is sqrt(2) times the quarter signs") {
    const DyadicTree tree = build_uniform(3, 2);
    const HaarSystem system = build_haar(tree);
    const AlphaSequence alphas = alphas_plus_minus(tree, system);
    const Symbol eta = petermichl_symbol(tree, system, alphas);

    const std::uint32_t root_fn = system.first_function(tree.root());
    const double r2 = std::sqrt(2.0);
    // quarters of the root are the level-2 cubes: leaves {0,1},{2,3},{4,5},{6,7}
    const double expected[8] = {r2, r2, -r2, -r2, r2, r2, -r2, -r2};
    for (std::uint32_t x = 0; x < 8; ++x)
        CHECK(eta.value(tree, system, root_fn, x) ==
              doctest::Approx(expected[x]).epsilon(1e-14));

    // classic quarter symbol: the same pattern with values +-1
    const Symbol classic = petermichl_classic_symbol(tree, system);
    for (std::uint32_t x = 0; x < 8; ++x)
        CHECK(classic.value(tree, system, root_fn, x) ==
              doctest::Approx(expected[x] / r2).epsilon(1e-14));

    // on the Lebesgue tree the quarter symbol differs from the shift's own
    // symbol by exactly sqrt(2), so T_classic = P / sqrt(2)
    Rng rng(5);
    const LeafFunction f = random_leaf_function(tree, rng, true);
    LeafFunction scaled = petermichl_apply(tree, system, alphas, f);
    for (auto& v : scaled.values) v /= r2;
    CHECK(oracles::max_abs_diff(apply_multiplier(tree, system, classic, f), scaled) <= 1e-12);

    CHECK_THROWS_AS(
        static_cast<void>(petermichl_classic_symbol(
            build_uniform(1, 3), build_haar(build_uniform(1, 3)))),
        Error);
}

TEST_CASE("shift kernel N matches both integral representations") {
    Rng rng(41);
    for (std::uint64_t seed : {13ull}) {
        const DyadicTree tree = build_random(seed, 3, 2, 3, {}, 0.1);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);
        const AlphaSequence alphas = alphas_plus_minus(tree, system);
        const KernelMatrix n = petermichl_kernel(tree, system, alphas);

        // N agrees with the assembled kernel of the generalized symbol
        const KernelMatrix k =
            assemble_kernel(tree, system, petermichl_symbol(tree, system, alphas));
        for (std::uint32_t x = 0; x < tree.leaf_count(); ++x)
            for (std::uint32_t y = 0; y < tree.leaf_count(); ++y)
                CHECK(std::abs(n(x, y) - k(x, y)) <= 1e-12);

        for (int trial = 0; trial < 5; ++trial) {
            const LeafFunction f = random_leaf_function(tree, rng);
            // P f(x) = int N(x,y) f(y) dmu(y)
            CHECK(oracles::max_abs_diff(petermichl_apply(tree, system, alphas, f),
                                        kernel_apply(tree, n, f)) <= 1e-11);
            // P* f(x) = int N(y,x) f(y) dmu(y)
            LeafFunction adj(tree.leaf_count());
            for (std::uint32_t x = 0; x < tree.leaf_count(); ++x) {
                double s = 0.0;
                for (std::uint32_t y = 0; y < tree.leaf_count(); ++y)
                    s += n(y, x) * f[y] * tree.leaf_measure(y);
                adj[x] = s;
            }
            CHECK(oracles::max_abs_diff(petermichl_adjoint_apply(tree, system, alphas, f),
                                        adj) <= 1e-11);
        }
    }
}

TEST_CASE("norm estimation: diagonal symbols and the binary shift") {
    const DyadicTree tree = build_uniform(4, 2);
    const HaarSystem system = build_haar(tree);

    std::vector<double> values(system.function_count(), 0.5);
    values[3] = -1.25;
    const Symbol diag = Symbol::constant(std::move(values));
    CHECK(l2_norm_estimate(tree, system, diag, 200, 7) ==
          doctest::Approx(1.25).epsilon(1e-9));

    CHECK(l2_norm_estimate(tree, system, zero_symbol(system), 50, 7) == 0.0);

    const AlphaSequence alphas = alphas_plus_minus(tree, system);
    const Symbol eta = petermichl_symbol(tree, system, alphas);
    CHECK(l2_norm_estimate(tree, system, eta, 200, 7) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}

#ifdef TREEHAAR_HAVE_EIGEN
TEST_CASE("norm estimation agrees with dense SVD") {
    for (std::uint64_t seed : {14ull}) {
        const DyadicTree tree = build_random(seed, 3, 2, 3, {}, 0.0);
        const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, seed);
        const AlphaSequence alphas = alphas_plus_minus(tree, system);
        const Symbol eta = petermichl_symbol(tree, system, alphas);

        const auto m = oracles::dense_matrix(tree, [&](const LeafFunction& f) {
            return apply_multiplier(tree, system, eta, f);
        });
        const double svd = spectral_norm_mu(tree, m);
        const double est = l2_norm_estimate(tree, system, eta, 2000, 3);
        CHECK(est == doctest::Approx(svd).epsilon(1e-6));
    }

    // ternary equal shift: top singular value sqrt(M_Q C(Q)) = sqrt(12)
    const DyadicTree tree = build_uniform(3, 3);
    const HaarSystem system = build_haar(tree, HaarStrategy::rotated_helmert, 2);
    const AlphaSequence alphas = alphas_plus_minus(tree, system);
    const auto m = oracles::dense_matrix(tree, [&](const LeafFunction& f) {
        return petermichl_apply(tree, system, alphas, f);
    });
    CHECK(spectral_norm_mu(tree, m) == doctest::Approx(std::sqrt(12.0)).epsilon(1e-10));
    const Symbol eta = petermichl_symbol(tree, system, alphas);
    CHECK(l2_norm_estimate(tree, system, eta, 500, 5) ==
          doctest::Approx(std::sqrt(12.0)).epsilon(1e-8));
}
#endif

TEST_CASE("alpha presets and json parsing") {
    const DyadicTree tree = build_uniform(2, 2);
    const HaarSystem system = build_haar(tree);

    const AlphaSequence pm = alphas_plus_minus(tree, system);
    // root function: +1; left child cube: +1; right child cube: -1
    CHECK(pm.values[system.first_function(tree.root())] == 1.0);
    CHECK(pm.values[system.first_function(tree.cube(tree.root()).children[0])] == 1.0);
    CHECK(pm.values[system.first_function(tree.cube(tree.root()).children[1])] == -1.0);
    CHECK(pm.sup == 1.0);

    const AlphaSequence r1 = alphas_random(system, 4);
    const AlphaSequence r2 = alphas_random(system, 4);
    CHECK(r1.values == r2.values);
    CHECK(r1.sup <= 1.0);

    const AlphaSequence file = alphas_from_json_text(
        tree, system,
        R"({"default": 1.0, "entries": [{"cube": 1, "index": 0, "value": -2.0}]})");
    CHECK(file.values[system.first_function(1)] == -2.0);
    CHECK(file.sup == 2.0);

    CHECK_THROWS_AS(static_cast<void>(alphas_from_json_text(
                        tree, system, R"({"entries": [{"cube": 0, "index": 0, "value": 1}]})")),
                    Error); // missing entries without default

    const Symbol sym = symbol_from_json_text(
        tree, system, R"({"kind": "constant", "default": 0.5})");
    CHECK(sym.bound() == 0.5);
}

TEST_CASE("fast path equals dense kernel path at 512 leaves") {
    const DyadicTree tree = build_uniform(9, 2); // 512 leaves
    const HaarSystem system = build_haar(tree);
    std::vector<double> values(system.function_count());
    Rng vrng(12);
    for (auto& v : values) v = vrng.next_uniform(-1.0, 1.0);
    const Symbol eta = Symbol::constant(std::move(values));

    const KernelMatrix k = assemble_kernel(tree, system, eta, 512);
    Rng rng(13);
    const LeafFunction f = random_leaf_function(tree, rng, true);
    const LeafFunction fast = apply_multiplier(tree, system, eta, f);
    const LeafFunction slow = kernel_apply(tree, k, f);
    CHECK(oracles::max_abs_diff(fast, slow) <= 1e-9);
}

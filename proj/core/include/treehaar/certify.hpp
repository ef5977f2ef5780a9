#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "treehaar/metric.hpp"
#include "treehaar/operators.hpp"

namespace treehaar {

struct CertifyLimits {
    std::uint32_t dense_limit = kDefaultDenseLimit;
    std::uint32_t triple_scan_limit = 512; // exhaustive below, sampled above
    std::size_t samples = 1'000'000;       // sampled-mode triple/pair budget
    std::uint64_t seed = 1;
};

/// Kernel size condition (1): max over pairs of delta(x,y) |K(x,y)|.
struct SizeReport {
    double c = 0.0;
    std::uint32_t x = 0, y = 0;
    std::size_t pairs = 0;
    bool empty = true;
};
SizeReport size_constant(const DyadicTree& tree, const KernelMatrix& kernel);

/// Smoothness conditions (2.a)/(2.b) with exponent one, scanned over
/// admissible triples 2 delta(x',x) <= delta(x,y). Each scanned triple also
/// asserts the lemma Q(x,y) = Q(x',y) through delta(x,y) = delta(x',y).
struct SmoothnessReport {
    double cx = 0.0;
    double cy = 0.0;
    double gamma_hat = 0.0; // least-squares fitted exponent (report only)
    bool lemma_ok = true;
    std::uint32_t lemma_x = 0, lemma_xp = 0, lemma_y = 0;
    std::size_t admissible = 0;
    bool empty = true;
    bool exhaustive = true;
};
SmoothnessReport smoothness_constants(const DyadicTree& tree, const KernelMatrix& kernel,
                                      const CertifyLimits& limits = {});

/// Symbol hypotheses: (a) sup |eta|, (b) the Lipschitz-type
/// quotient |eta(x',h)-eta(x,h)| mu(Q(h)) / delta(x,x') with eta extended by
/// zero off Q(h). Constant symbols give bb = 0 exactly. Grandchild-piecewise
/// symbols are scanned exactly cell-by-cell at any size.
struct SymbolConditionReport {
    double ba = 0.0;
    double bb = 0.0;
    std::size_t pairs = 0;
    bool exact = true;
    bool empty = true;
};
SymbolConditionReport symbol_conditions(const DyadicTree& tree, const HaarSystem& system,
                                        const Symbol& symbol,
                                        const CertifyLimits& limits = {});

/// Closed-form bound on sup |eta| for the generalized shift symbol,
/// assembled from measured constants: M^2 ||alpha|| sqrt(C) C2/C1.
double symbol_ba_bound(const TreeStats& stats, const HaarCheck& haar, double alpha_sup);

/// Closed-form bound on the smoothness quotient, the worst of the
/// within-child case 2 C2 (M-1) C^{3/2} ||alpha|| / C1 and twice the sup
/// bound (the separated and boundary cases).
double symbol_bb_bound(const TreeStats& stats, const HaarCheck& haar, double alpha_sup);

/// CZ condition (3) on random disjoint-support Haar-span pairs: max residual
/// |<T phi, psi> - sum_xy psi(x) K(x,y) phi(y) mu mu| over unit-norm draws.
double weak_integral_identity(const DyadicTree& tree, const HaarSystem& system,
                              const Symbol& symbol, const KernelMatrix& kernel,
                              int trials, std::uint64_t seed);

/// Lower-bound probe of ||T||_{p->p} from random mean-zero functions,
/// near-atoms, and power-iteration refinements of the best candidate.
double empirical_lp_probe(const DyadicTree& tree, const HaarSystem& system,
                          const Symbol& symbol, double p, int trials,
                          std::uint64_t seed);

/// sup over trials and levels of lambda mu{|Tf| > lambda} / ||f||_1.
double weak_11_probe(const DyadicTree& tree, const HaarSystem& system,
                     const Symbol& symbol, int trials, std::uint64_t seed);

struct SweepRow {
    int depth = 0;
    std::uint32_t leaves = 0;
    double size_c = 0.0;
    double smooth_cx = 0.0;
    double smooth_cy = 0.0;
    double gamma_hat = 0.0;
    double symbol_ba = 0.0;
    double symbol_bb = 0.0;
    double haar_lip = 0.0;
    double growth_eps = 0.0;
    bool skipped = false;
    bool smooth_empty = false;
};

/// One certification row per depth; deterministic for fixed seeds. Depths
/// whose trees exceed the dense limit are marked skipped.
std::vector<SweepRow> stability_sweep(
    const std::function<DyadicTree(int)>& builder, const std::vector<int>& depths,
    const std::function<Symbol(const DyadicTree&, const HaarSystem&)>& symbol_maker,
    std::uint64_t haar_seed, const CertifyLimits& limits = {},
    HaarStrategy strategy = HaarStrategy::rotated_helmert,
    double nonvanish_tol = 1e-3);

/// Largest relative change between consecutive rows of one column; the
/// depth-stability surrogate compares the deepest consecutive pair.
double tail_variation(const std::vector<double>& column);

} // namespace treehaar

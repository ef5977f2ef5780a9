#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treehaar/haar.hpp"

namespace treehaar {

/// Multiplier symbol: either one real per Haar function (convolution type)
/// or a bounded function of the point and the Haar function, stored at leaf
/// resolution on Q(h) and zero outside.
class Symbol {
public:
    enum class Kind { constant, variable };

    static Symbol constant(std::vector<double> per_function);
    /// values[h] holds one entry per leaf of Q(h), in leaf order.
    static Symbol variable(const DyadicTree& tree, const HaarSystem& system,
                           std::vector<std::vector<double>> values,
                           bool piecewise_grandchild = false);

    Kind kind() const noexcept { return kind_; }
    std::uint32_t function_count() const noexcept {
        return static_cast<std::uint32_t>(offsets_.empty()
                                              ? constants_.size()
                                              : offsets_.size() - 1);
    }
    double bound() const noexcept { return bound_; }

    /// True when the symbol is constant on grandchildren of each Q(h); the
    /// certification scans exploit it.
    bool piecewise_grandchild() const noexcept { return piecewise_grandchild_; }

    double constant_value(std::uint32_t fn) const { return constants_[fn]; }

    /// eta(x, h) with the zero extension off Q(h).
    double value(const DyadicTree& tree, const HaarSystem& system, std::uint32_t fn,
                 std::uint32_t leaf) const {
        if (kind_ == Kind::constant) return constants_[fn];
        const CubeRecord& rec = tree.cube(system.function(fn).cube);
        if (leaf < rec.leaf_begin || leaf >= rec.leaf_end) return 0.0;
        return variable_[offsets_[fn] + (leaf - rec.leaf_begin)];
    }

private:
    Kind kind_ = Kind::constant;
    std::vector<double> constants_;
    std::vector<double> variable_;      // concatenated per-function blocks
    std::vector<std::size_t> offsets_;  // size function_count + 1
    double bound_ = 0.0;
    bool piecewise_grandchild_ = false;
};

/// Bounded coefficient sequence for the generalized shift, one per Haar
/// function.
struct AlphaSequence {
    std::vector<double> values;
    double sup = 0.0;
};

/// +1 on functions whose cube sits at an even position among its parent's
/// children, -1 at odd positions (left/right orientation in the binary case).
AlphaSequence alphas_plus_minus(const DyadicTree& tree, const HaarSystem& system);
AlphaSequence alphas_ones(const HaarSystem& system);
AlphaSequence alphas_random(const HaarSystem& system, std::uint64_t seed);

struct KernelMatrix {
    std::uint32_t n = 0;
    std::vector<double> entries; // row-major

    double operator()(std::uint32_t x, std::uint32_t y) const {
        return entries[static_cast<std::size_t>(x) * n + y];
    }
    double& at(std::uint32_t x, std::uint32_t y) {
        return entries[static_cast<std::size_t>(x) * n + y];
    }
};

inline constexpr std::uint32_t kDefaultDenseLimit = 4096;

/// T_eta f = sum_h eta(.,h) <f,h> h(.); the scaling component maps to zero.
LeafFunction apply_multiplier(const DyadicTree& tree, const HaarSystem& system,
                              const Symbol& symbol, const LeafFunction& f);

/// Adjoint of T_eta: coefficient of h is <f, eta(.,h) h(.)>.
LeafFunction apply_multiplier_adjoint(const DyadicTree& tree, const HaarSystem& system,
                                      const Symbol& symbol, const LeafFunction& f);

/// Dense kernel K(x,y) = sum_h eta(x,h) h(x) h(y); T_eta f(x) = sum_y K(x,y) f(y) mu_y.
KernelMatrix assemble_kernel(const DyadicTree& tree, const HaarSystem& system,
                             const Symbol& symbol,
                             std::uint32_t dense_limit = kDefaultDenseLimit);

/// Generalized Petermichl shift: the coefficient of each h is redistributed,
/// weighted by alpha, onto every Haar function living on a child of Q(h).
LeafFunction petermichl_apply(const DyadicTree& tree, const HaarSystem& system,
                              const AlphaSequence& alphas, const LeafFunction& f);

LeafFunction petermichl_adjoint_apply(const DyadicTree& tree, const HaarSystem& system,
                                      const AlphaSequence& alphas, const LeafFunction& f);

/// P*P in the Haar basis. The exact structure is block-constant: the matrix
/// entry for h, h' on the same cube Q is C(Q) = sum over children R of Q of
/// sum_{h~ in H(R)} alpha^2, and zero across different cubes. C(Q) = 0 on
/// cubes whose children are all leaves (finite-depth boundary).
struct ComposeReport {
    std::vector<double> diag;          // computed C(Q) per cube id; 0 for leaves/boundary
    std::vector<double> formula;       // sum of squared alphas per cube
    double structure_residual = 0.0;   // max |matrix - block model|
    double offblock_residual = 0.0;    // max |entry across different cubes|
    double formula_residual = 0.0;     // max |computed diag - formula|
    bool unimodular = false;           // all |alpha| = 1
    bool bracket_ok = true;            // 1 <= C(Q) <= M^2 on interior cubes (unimodular only)
};
ComposeReport petermichl_compose_diag(const DyadicTree& tree, const HaarSystem& system,
                                      const AlphaSequence& alphas);

/// The variable symbol of the generalized shift:
/// eta(x,h) = sum_{R in L(Q(h))} ( sum_{h~ in H(R)} alpha_{h~} h~(x) / h_R ) chi_R(x),
/// so that eta(x,h) h(x) = sum_{R,h~} alpha_{h~} h~(x) and
/// apply_multiplier(petermichl_symbol) == petermichl_apply.
Symbol petermichl_symbol(const DyadicTree& tree, const HaarSystem& system,
                         const AlphaSequence& alphas);

/// Classic +-1 quarter symbol on all-binary trees: +1 on the first and third
/// quarters of Q(h), -1 on the second and fourth, 0 on leaf children. On the
/// dyadic Lebesgue tree its multiplier equals sqrt(2) times the shift.
Symbol petermichl_classic_symbol(const DyadicTree& tree, const HaarSystem& system);

/// Dense kernel N(x,y) of the shift (integral representation).
KernelMatrix petermichl_kernel(const DyadicTree& tree, const HaarSystem& system,
                               const AlphaSequence& alphas,
                               std::uint32_t dense_limit = kDefaultDenseLimit);

/// Power iteration on T*T restricted to mean-zero functions; returns the
/// operator norm estimate. Deterministic in the seed.
double l2_norm_estimate(const DyadicTree& tree, const HaarSystem& system,
                        const Symbol& symbol, int iterations, std::uint64_t seed);

/// JSON parsing for alpha sequences and symbols (entries keyed by cube id and
/// index within cube); see the CLI docs for the schema.
AlphaSequence alphas_from_json_text(const DyadicTree& tree, const HaarSystem& system,
                                    const std::string& text);
Symbol symbol_from_json_text(const DyadicTree& tree, const HaarSystem& system,
                             const std::string& text);

} // namespace treehaar

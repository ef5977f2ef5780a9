#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treehaar/function.hpp"
#include "treehaar/tree.hpp"

namespace treehaar {

/// Haar construction failed to reach the nonvanishing tolerance.
class HaarError : public Error {
public:
    HaarError(CubeId cube, double best, std::string msg)
        : Error(std::move(msg)), cube(cube), best_tolerance(best) {}
    CubeId cube;
    double best_tolerance;
};

/// One detail function: constant child_values[i] on the i-th child of its
/// cube, zero outside. Mean zero and unit norm in L^2(mu); all child values
/// nonzero so that |h| is comparable across the whole cube.
struct HaarFunction {
    CubeId cube = 0;
    std::uint32_t index_within_cube = 0;
    std::vector<double> child_values;
};

enum class HaarStrategy {
    classical_binary, // closed form on binary cubes; no rotation for m >= 3
    rotated_helmert,  // weighted Helmert complement + seeded random rotation
};

/// Coefficients of a function in {scaling} + Haar basis. `detail` is indexed
/// by global function id (cubes in preorder, functions in order within cube).
struct HaarCoefficients {
    double scaling = 0.0;
    std::vector<double> detail;
};

class HaarSystem {
public:
    std::uint32_t function_count() const noexcept {
        return static_cast<std::uint32_t>(functions_.size());
    }
    const HaarFunction& function(std::uint32_t id) const { return functions_[id]; }

    /// Functions attached to cube q (empty span for leaves).
    std::span<const HaarFunction> functions_on(CubeId q) const {
        const auto b = first_fn_[q];
        const auto e = first_fn_[q + 1];
        return {functions_.data() + b, functions_.data() + e};
    }
    std::uint32_t first_function(CubeId q) const { return first_fn_[q]; }
    std::uint32_t count_on(CubeId q) const { return first_fn_[q + 1] - first_fn_[q]; }

    /// Value of the root scaling function chi_X / mu(X)^{1/2}.
    double scaling_value() const noexcept { return scaling_value_; }

    struct Parts {
        std::vector<HaarFunction> functions;
        std::vector<std::uint32_t> first_fn; // size cube_count + 1
        double scaling_value = 0.0;
    };
    explicit HaarSystem(Parts parts)
        : functions_(std::move(parts.functions)),
          first_fn_(std::move(parts.first_fn)),
          scaling_value_(parts.scaling_value) {}

private:
    std::vector<HaarFunction> functions_;
    std::vector<std::uint32_t> first_fn_;
    double scaling_value_ = 0.0;
};

/// Builds a Haar system (orthonormal, mean zero, cube-supported, child
/// counts exact, values comparable). Binary cubes always get the
/// classical two-valued function, positive on the first child. Cubes with
/// m >= 3 children get m-1 functions from a weighted Helmert basis of the
/// constant's orthogonal complement; under rotated_helmert that basis is
/// rotated by a seeded random orthogonal matrix and redrawn (up to 64 times)
/// until every child value clears nonvanish_tol relative to the function's
/// largest one. The plain Helmert basis has zero entries, so
/// classical_binary fails on any cube with m >= 3.
HaarSystem build_haar(const DyadicTree& tree,
                      HaarStrategy strategy = HaarStrategy::rotated_helmert,
                      std::uint64_t seed = 1, double nonvanish_tol = 1e-3);

struct HaarCheck {
    double c1 = 0.0;                // min |h| * mu(Q(h))^{1/2}
    double c2 = 0.0;                // max |h| * mu(Q(h))^{1/2}
    double h5_constant = 0.0;       // c2 / c1
    double max_mean_residual = 0.0; // worst |integral of h|
    double max_norm_residual = 0.0; // |norm - 1|
    double max_gram_residual = 0.0; // vs identity
    bool gram_global = false;       // full system Gram vs per-cube blocks only
    bool counts_ok = true;          // child count - 1 functions per cube
    bool support_ok = true;         // support straddles the children
    bool pass = true;
};

HaarCheck verify_haar(const DyadicTree& tree, const HaarSystem& system,
                      std::uint32_t global_gram_leaf_limit = 1024);

/// <f,h> for every h plus the scaling coefficient; O(n M) bottom-up.
HaarCoefficients analyze(const DyadicTree& tree, const HaarSystem& system,
                         const LeafFunction& f);

/// Inverse of analyze; O(n M) top-down.
LeafFunction synthesize(const DyadicTree& tree, const HaarSystem& system,
                        const HaarCoefficients& coeffs);

/// h as a function on all leaves (zero off Q(h)).
LeafFunction haar_as_leaf_function(const DyadicTree& tree, const HaarSystem& system,
                                   std::uint32_t function_id);

/// max over h and leaf pairs of |h(x) - h(x')| mu(Q(h))^{3/2} / delta(x,x').
/// Exact: the maximum over pairs reduces to child-value differences at
/// delta = mu(Q(h)) and single values against mu(parent(Q(h))).
double haar_lipschitz_constant(const DyadicTree& tree, const HaarSystem& system);

/// JSON export (cube id, index, child values, scaling) for cross-checks.
std::string haar_to_json_text(const DyadicTree& tree, const HaarSystem& system);

} // namespace treehaar

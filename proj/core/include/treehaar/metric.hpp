#pragma once

#include <cstdint>
#include <vector>

#include "treehaar/tree.hpp"

namespace treehaar {

/// Lowest common ancestor of two leaves in the collapsed tree; the leaf cube
/// itself when x == y (the delta(x,x) = 0 sentinel).
CubeId smallest_common_cube(const DyadicTree& tree, std::uint32_t x, std::uint32_t y);

/// Dyadic ultrametric: measure of the smallest cube containing both leaves,
/// zero on the diagonal.
double delta(const DyadicTree& tree, std::uint32_t x, std::uint32_t y);

/// Closed delta-ball around leaf x: the span of the maximal cube containing x
/// with measure <= r. Falls back to {x} when even the leaf cube is too heavy;
/// covers everything when r reaches the total mass.
struct LeafRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t size() const noexcept { return end - begin; }
    bool operator==(const LeafRange&) const = default;
};
LeafRange ball(const DyadicTree& tree, std::uint32_t x, double r);

/// Dense leaf-by-leaf delta table.
class DeltaMatrix {
public:
    DeltaMatrix() = default;
    DeltaMatrix(std::uint32_t n, std::vector<double> data)
        : n_(n), data_(std::move(data)) {}
    std::uint32_t size() const noexcept { return n_; }
    double operator()(std::uint32_t x, std::uint32_t y) const {
        return data_[static_cast<std::size_t>(x) * n_ + y];
    }
    double& at(std::uint32_t x, std::uint32_t y) {
        return data_[static_cast<std::size_t>(x) * n_ + y];
    }

private:
    std::uint32_t n_ = 0;
    std::vector<double> data_;
};

DeltaMatrix delta_matrix(const DyadicTree& tree);

enum class ScanMode { exhaustive, sampled };

struct UltrametricReport {
    bool pass = true;
    std::size_t triples_checked = 0;
    // worst triple and its violation delta(x,y) - max(delta(x,z), delta(z,y))
    std::uint32_t x = 0, y = 0, z = 0;
    double violation = 0.0;
};

/// Checks delta(x,y) <= max(delta(x,z), delta(z,y)) over triples of a
/// possibly hand-corrupted table (negative controls use this entry point).
UltrametricReport check_ultrametric(const DeltaMatrix& d, ScanMode mode,
                                    std::uint64_t seed = 1,
                                    std::size_t samples = 1'000'000);

UltrametricReport verify_ultrametric(const DyadicTree& tree, ScanMode mode,
                                     std::uint64_t seed = 1,
                                     std::size_t samples = 1'000'000);

struct NormalityReport {
    double sup_ratio = 0.0; // max mu(B(x,r))/r over the sweep
    double inf_ratio = 0.0; // min mu(B(x,r))/r over the sweep
    bool ball_equals_cube = true;
    std::size_t pairs_checked = 0;
    double r_min = 0.0; // resolution floor of the sweep
    double r_max = 0.0; // total mass
};

/// Sweeps r over all cube measures (and one-ulp perturbations) and all
/// leaves, r clamped below by the resolution scale: the smallest branching
/// cube and the leaf's own measure (below either the continuum statement has
/// no finite counterpart).
NormalityReport verify_normal(const DyadicTree& tree);

/// max over cubes Q and leaf pairs of |chi_Q(x) - chi_Q(y)| * mu(Q) / delta(x,y);
/// the Lipschitz property of characteristic functions says this is <= 1.
double char_lipschitz_constant(const DyadicTree& tree);

} // namespace treehaar

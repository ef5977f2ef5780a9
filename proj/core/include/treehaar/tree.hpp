#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace treehaar {

/// Base error type for everything in this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent tree files / structures.
class TreeError : public Error {
public:
    using Error::Error;
};

using CubeId = std::uint32_t;
inline constexpr CubeId kInvalidCube = std::numeric_limits<CubeId>::max();

struct CubeRecord {
    CubeId parent = kInvalidCube;        // kInvalidCube at the root
    std::uint32_t pos_in_parent = 0;     // index within parent's child list
    std::int32_t level = 0;              // root is 0, child = parent + 1
    double measure = 0.0;                // sum of leaf weights under this cube
    std::uint32_t leaf_begin = 0;        // half-open span of covered leaves
    std::uint32_t leaf_end = 0;
    std::vector<CubeId> children;        // ordered; empty for leaves

    bool is_leaf() const noexcept { return children.empty(); }
    std::uint32_t leaf_count() const noexcept { return leaf_end - leaf_begin; }
};

/// Structural constants of a tree: max branching M, the worst parent/child
/// measure ratio C, and the geometric growth margin
/// (ratio minus one) that makes ancestor measures grow geometrically.
struct TreeStats {
    int max_children = 0;
    double dyadic_doubling = 0.0;
    double growth_eps = 0.0;
};

/// Finite rooted weighted tree: cubes in depth-first preorder (root = 0),
/// purely atomic measure carried by the leaves, internal measures summed
/// bottom-up. After normalization every internal cube has >= 2 children,
/// so the reduced family is exactly the set of internal cubes.
class DyadicTree {
public:
    static constexpr std::uint32_t kMaxLeaves = 1u << 24;

    std::uint32_t cube_count() const noexcept {
        return static_cast<std::uint32_t>(cubes_.size());
    }
    const CubeRecord& cube(CubeId id) const { return cubes_[id]; }
    CubeId root() const noexcept { return 0; }
    int depth() const noexcept { return depth_; }
    double total_measure() const { return cubes_[0].measure; }

    std::uint32_t leaf_count() const noexcept {
        return static_cast<std::uint32_t>(leaf_cubes_.size());
    }
    double leaf_measure(std::uint32_t leaf) const { return leaf_measures_[leaf]; }
    CubeId leaf_cube(std::uint32_t leaf) const { return leaf_cubes_[leaf]; }

    /// Internal cubes (the reduced family) in preorder.
    const std::vector<CubeId>& internal_cubes() const noexcept { return internal_; }

    bool operator==(const DyadicTree& other) const;

    void require_leaf(std::uint32_t leaf) const {
        if (leaf >= leaf_count())
            throw Error("leaf index " + std::to_string(leaf) + " out of range (" +
                        std::to_string(leaf_count()) + " leaves)");
    }

    // Construction goes through the builders below.
    struct Parts {
        std::vector<CubeRecord> cubes;
        std::vector<double> leaf_measures;
        std::vector<CubeId> leaf_cubes;
        std::vector<CubeId> internal;
        int depth = 0;
    };
    explicit DyadicTree(Parts parts)
        : cubes_(std::move(parts.cubes)),
          leaf_measures_(std::move(parts.leaf_measures)),
          leaf_cubes_(std::move(parts.leaf_cubes)),
          internal_(std::move(parts.internal)),
          depth_(parts.depth) {}

private:
    std::vector<CubeRecord> cubes_;
    std::vector<double> leaf_measures_;
    std::vector<CubeId> leaf_cubes_;
    std::vector<CubeId> internal_;
    int depth_ = 0;
};

/// Complete tree with `branching^depth` leaves. Empty weights means equal
/// weights with total mass one; otherwise one positive weight per leaf in
/// canonical (depth-first) order.
DyadicTree build_uniform(int depth, int branching,
                         const std::vector<double>& leaf_weights = {});

struct WeightLaw {
    enum class Kind { equal, uniform, log_uniform };
    Kind kind = Kind::log_uniform;
    double lo = 0.5;
    double hi = 2.0;
};

/// Seed-deterministic random tree. Branching factors are drawn uniformly in
/// [branching_min, branching_max] per internal cube; with early_leaf_prob a
/// non-root cube above max depth may stop branching early, producing leaves
/// at mixed levels.
DyadicTree build_random(std::uint64_t seed, int depth, int branching_min,
                        int branching_max, const WeightLaw& law = {},
                        double early_leaf_prob = 0.0);

struct LoadOptions {
    bool strict_unary = false;        // reject unary chains instead of collapsing
    bool validate = true;             // verify additivity of stored measures
    bool use_stored_measures = false; // trust the file's `measures` field as-is
};

/// Reads the JSON tree format (`leaf_weights`, `structure`, optional
/// `measures`); collapses unary chains unless strict. See the CLI docs for
/// the exact grammar.
DyadicTree load_tree(const std::string& path, const LoadOptions& options = {});
DyadicTree tree_from_json_text(const std::string& text, const LoadOptions& options = {});

void save_tree(const DyadicTree& tree, const std::string& path);
std::string tree_to_json_text(const DyadicTree& tree);

struct StructureCheck {
    bool pass = true;
    std::vector<std::string> failures;
    TreeStats stats;
};

/// Re-checks every structural invariant (partition and nesting, measure
/// additivity, branching after normalization) and computes TreeStats.
/// Failures are reported, never thrown.
StructureCheck verify_dyadic(const DyadicTree& tree);

TreeStats tree_stats(const DyadicTree& tree);

} // namespace treehaar

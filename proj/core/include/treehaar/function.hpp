#pragma once

#include <cmath>
#include <vector>

#include "treehaar/rng.hpp"
#include "treehaar/tree.hpp"

namespace treehaar {

/// Real function on X, one value per leaf in canonical order.
struct LeafFunction {
    std::vector<double> values;

    LeafFunction() = default;
    explicit LeafFunction(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit LeafFunction(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
};

inline void require_size(const DyadicTree& tree, const LeafFunction& f) {
    if (f.size() != tree.leaf_count())
        throw Error("function length " + std::to_string(f.size()) +
                    " != leaf count " + std::to_string(tree.leaf_count()));
}

inline double integral(const DyadicTree& tree, const LeafFunction& f) {
    require_size(tree, f);
    double s = 0.0;
    for (std::uint32_t i = 0; i < tree.leaf_count(); ++i)
        s += f[i] * tree.leaf_measure(i);
    return s;
}

/// mu-weighted inner product.
inline double dot(const DyadicTree& tree, const LeafFunction& f, const LeafFunction& g) {
    require_size(tree, f);
    require_size(tree, g);
    double s = 0.0;
    for (std::uint32_t i = 0; i < tree.leaf_count(); ++i)
        s += f[i] * g[i] * tree.leaf_measure(i);
    return s;
}

inline double norm2(const DyadicTree& tree, const LeafFunction& f) {
    return std::sqrt(dot(tree, f, f));
}

inline double norm_p(const DyadicTree& tree, const LeafFunction& f, double p) {
    require_size(tree, f);
    double s = 0.0;
    for (std::uint32_t i = 0; i < tree.leaf_count(); ++i)
        s += std::pow(std::abs(f[i]), p) * tree.leaf_measure(i);
    return std::pow(s, 1.0 / p);
}

inline double norm1(const DyadicTree& tree, const LeafFunction& f) {
    require_size(tree, f);
    double s = 0.0;
    for (std::uint32_t i = 0; i < tree.leaf_count(); ++i)
        s += std::abs(f[i]) * tree.leaf_measure(i);
    return s;
}

/// f minus its mu-average.
inline LeafFunction mean_zero(const DyadicTree& tree, const LeafFunction& f) {
    const double mean = integral(tree, f) / tree.total_measure();
    LeafFunction g = f;
    for (auto& v : g.values) v -= mean;
    return g;
}

inline LeafFunction random_leaf_function(const DyadicTree& tree, Rng& rng,
                                         bool project_mean_zero = false) {
    LeafFunction f(tree.leaf_count());
    for (auto& v : f.values) v = rng.next_uniform(-1.0, 1.0);
    return project_mean_zero ? mean_zero(tree, f) : f;
}

} // namespace treehaar

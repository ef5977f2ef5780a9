#include "treehaar/tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "treehaar/rng.hpp"

#include <nlohmann/json.hpp>

namespace treehaar {

namespace {

using json = nlohmann::ordered_json;

struct ProtoNode {
    std::vector<ProtoNode> children;
    double stored_measure = -1.0; // from the optional `measures` field
    bool is_leaf() const { return children.empty(); }
};

// Collapses unary chains in place: a cube with a single child is merged with
// that child (the reduced family keeps only branching cubes).
void collapse_unary(ProtoNode& node, bool strict, int* collapsed) {
    while (node.children.size() == 1) {
        if (strict) throw TreeError("unary chain present (strict mode)");
        ProtoNode child = std::move(node.children.front());
        node.children = std::move(child.children);
        ++*collapsed;
    }
    for (auto& c : node.children) collapse_unary(c, strict, collapsed);
}

std::uint32_t count_leaves(const ProtoNode& node) {
    if (node.is_leaf()) return 1;
    std::uint32_t n = 0;
    for (const auto& c : node.children) n += count_leaves(c);
    return n;
}

struct Assembler {
    const std::vector<double>& weights;
    bool use_stored;
    DyadicTree::Parts parts;
    std::uint32_t next_leaf = 0;

    CubeId emit(const ProtoNode& node, CubeId parent, std::uint32_t pos, std::int32_t level) {
        const CubeId id = static_cast<CubeId>(parts.cubes.size());
        parts.cubes.emplace_back();
        {
            CubeRecord& rec = parts.cubes.back();
            rec.parent = parent;
            rec.pos_in_parent = pos;
            rec.level = level;
            rec.leaf_begin = next_leaf;
        }
        parts.depth = std::max(parts.depth, static_cast<int>(level));
        if (node.is_leaf()) {
            const double w = use_stored && node.stored_measure >= 0.0
                                 ? node.stored_measure
                                 : weights[next_leaf];
            parts.cubes[id].measure = w;
            parts.cubes[id].leaf_end = next_leaf + 1;
            parts.leaf_measures.push_back(w);
            parts.leaf_cubes.push_back(id);
            ++next_leaf;
            return id;
        }
        double sum = 0.0;
        std::vector<CubeId> children;
        children.reserve(node.children.size());
        for (std::uint32_t i = 0; i < node.children.size(); ++i) {
            const CubeId cid = emit(node.children[i], id, i, level + 1);
            children.push_back(cid);
            sum += parts.cubes[cid].measure;
        }
        CubeRecord& rec = parts.cubes[id];
        rec.children = std::move(children);
        rec.leaf_end = next_leaf;
        rec.measure = use_stored && node.stored_measure >= 0.0 ? node.stored_measure : sum;
        parts.internal.push_back(id);
        return id;
    }
};

DyadicTree assemble(const ProtoNode& root, const std::vector<double>& weights,
                    bool use_stored_measures) {
    Assembler a{weights, use_stored_measures, {}, 0};
    const std::uint32_t n = count_leaves(root);
    a.parts.cubes.reserve(2 * static_cast<std::size_t>(n));
    a.parts.leaf_measures.reserve(n);
    a.parts.leaf_cubes.reserve(n);
    a.emit(root, kInvalidCube, 0, 0);
    // preorder emission interleaves internal ids; keep them sorted
    std::sort(a.parts.internal.begin(), a.parts.internal.end());
    return DyadicTree(std::move(a.parts));
}

void check_weights(const std::vector<double>& weights, std::uint32_t expected) {
    if (weights.size() != expected)
        throw TreeError("weight list length " + std::to_string(weights.size()) +
                        " != leaf count " + std::to_string(expected));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
            throw TreeError("nonpositive weight at leaf " + std::to_string(i));
    }
}

ProtoNode uniform_proto(int depth, int branching) {
    ProtoNode node;
    if (depth == 0) return node;
    node.children.resize(static_cast<std::size_t>(branching));
    for (auto& c : node.children) c = uniform_proto(depth - 1, branching);
    return node;
}

ProtoNode random_proto(Rng& rng, int depth, int bmin, int bmax, double early_leaf_prob,
                       bool is_root) {
    ProtoNode node;
    if (depth == 0) return node;
    if (!is_root && early_leaf_prob > 0.0 && rng.next_double() < early_leaf_prob)
        return node;
    const int b = static_cast<int>(rng.next_int(bmin, bmax));
    node.children.resize(static_cast<std::size_t>(b));
    for (auto& c : node.children)
        c = random_proto(rng, depth - 1, bmin, bmax, early_leaf_prob, false);
    return node;
}

// Guards leaves-at-max-depth only; early leaves keep invariants intact but a
// fully collapsed random draw could leave a unary root, so retry the draw.
bool has_branching_root(const ProtoNode& root) { return root.children.size() >= 2; }

json structure_to_json(const DyadicTree& tree, CubeId id) {
    const CubeRecord& rec = tree.cube(id);
    if (rec.is_leaf()) return json(0);
    json arr = json::array();
    for (CubeId c : rec.children) arr.push_back(structure_to_json(tree, c));
    return arr;
}

ProtoNode parse_structure(const json& j, std::uint64_t* leaf_count, int depth = 0) {
    if (depth > 4096)
        throw TreeError("structure grammar: nesting deeper than 4096 levels");
    ProtoNode node;
    if (j.is_number()) {
        if (j != 0)
            throw TreeError("structure grammar: a leaf must be the number 0");
        ++*leaf_count;
        if (*leaf_count > DyadicTree::kMaxLeaves)
            throw TreeError("tree exceeds the maximum of 2^24 leaves");
        return node;
    }
    if (!j.is_array() || j.empty())
        throw TreeError("structure grammar: a cube must be 0 or a non-empty array");
    node.children.reserve(j.size());
    for (const auto& c : j) node.children.push_back(parse_structure(c, leaf_count, depth + 1));
    return node;
}

// The `measures` field pairs with nodes in depth-first file order.
void attach_measures(ProtoNode& node, const std::vector<double>& measures, std::size_t* pos) {
    if (*pos >= measures.size())
        throw TreeError("measures field shorter than the node count");
    node.stored_measure = measures[(*pos)++];
    for (auto& c : node.children) attach_measures(c, measures, pos);
}

void validate_stored_measures(const ProtoNode& node, const std::vector<double>& weights,
                              std::uint32_t* next_leaf, CubeId* dfs_id) {
    const CubeId id = (*dfs_id)++;
    if (node.is_leaf()) {
        const double w = weights[*next_leaf];
        if (std::abs(node.stored_measure - w) > 1e-12 * std::max(1.0, std::abs(w)))
            throw TreeError("stored measure at cube " + std::to_string(id) +
                            " disagrees with its leaf weight");
        ++*next_leaf;
        return;
    }
    double sum = 0.0;
    for (const auto& c : node.children) sum += c.stored_measure;
    if (std::abs(node.stored_measure - sum) > 1e-12 * std::max(1.0, std::abs(sum)))
        throw TreeError("measure additivity violated at cube " + std::to_string(id) +
                        ": stored " + std::to_string(node.stored_measure) +
                        ", children sum " + std::to_string(sum));
    for (const auto& c : node.children) validate_stored_measures(c, weights, next_leaf, dfs_id);
}

} // namespace

bool DyadicTree::operator==(const DyadicTree& other) const {
    if (cubes_.size() != other.cubes_.size() || leaf_measures_ != other.leaf_measures_)
        return false;
    for (std::size_t i = 0; i < cubes_.size(); ++i) {
        const CubeRecord& a = cubes_[i];
        const CubeRecord& b = other.cubes_[i];
        if (a.parent != b.parent || a.children != b.children || a.level != b.level ||
            a.measure != b.measure || a.leaf_begin != b.leaf_begin || a.leaf_end != b.leaf_end)
            return false;
    }
    return true;
}

DyadicTree build_uniform(int depth, int branching, const std::vector<double>& leaf_weights) {
    if (depth < 1) throw TreeError("build_uniform: depth must be >= 1");
    if (branching < 2) throw TreeError("build_uniform: branching must be >= 2");
    const double log_leaves = depth * std::log2(static_cast<double>(branching));
    if (log_leaves > 24.0) throw TreeError("build_uniform: tree exceeds 2^24 leaves");
    std::uint32_t n = 1;
    for (int i = 0; i < depth; ++i) n *= static_cast<std::uint32_t>(branching);

    std::vector<double> weights;
    if (leaf_weights.empty()) {
        weights.assign(n, 1.0 / static_cast<double>(n));
    } else {
        weights = leaf_weights;
    }
    check_weights(weights, n);
    return assemble(uniform_proto(depth, branching), weights, false);
}

DyadicTree build_random(std::uint64_t seed, int depth, int branching_min, int branching_max,
                        const WeightLaw& law, double early_leaf_prob) {
    if (depth < 1) throw TreeError("build_random: depth must be >= 1");
    if (branching_min < 2 || branching_max < branching_min)
        throw TreeError("build_random: empty branching range");
    const double log_leaves = depth * std::log2(static_cast<double>(branching_max));
    if (log_leaves > 24.0) throw TreeError("build_random: tree may exceed 2^24 leaves");

    Rng structure_rng = Rng(seed).fork(1);
    ProtoNode root;
    for (int attempt = 0; attempt < 64; ++attempt) {
        root = random_proto(structure_rng, depth, branching_min, branching_max,
                            early_leaf_prob, true);
        int collapsed = 0;
        collapse_unary(root, false, &collapsed);
        if (has_branching_root(root)) break;
    }
    if (!has_branching_root(root))
        throw TreeError("build_random: failed to draw a branching root");

    const std::uint32_t n = count_leaves(root);
    Rng weight_rng = Rng(seed).fork(2);
    std::vector<double> weights(n);
    switch (law.kind) {
        case WeightLaw::Kind::equal:
            std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(n));
            break;
        case WeightLaw::Kind::uniform:
            for (auto& w : weights) w = weight_rng.next_uniform(law.lo, law.hi);
            break;
        case WeightLaw::Kind::log_uniform: {
            const double llo = std::log(law.lo);
            const double lhi = std::log(law.hi);
            for (auto& w : weights) w = std::exp(weight_rng.next_uniform(llo, lhi));
            break;
        }
    }
    check_weights(weights, n);
    return assemble(root, weights, false);
}

DyadicTree tree_from_json_text(const std::string& text, const LoadOptions& options) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw TreeError(std::string("tree file parse failure: ") + e.what());
    }
    if (!j.is_object() || !j.contains("leaf_weights") || !j.contains("structure"))
        throw TreeError("tree file must be an object with leaf_weights and structure");

    std::vector<double> weights;
    try {
        weights = j.at("leaf_weights").get<std::vector<double>>();
    } catch (const std::exception& e) {
        throw TreeError(std::string("leaf_weights parse failure: ") + e.what());
    }
    if (weights.size() > DyadicTree::kMaxLeaves)
        throw TreeError("tree exceeds the maximum of 2^24 leaves");

    std::uint64_t leaf_count = 0;
    ProtoNode root = parse_structure(j.at("structure"), &leaf_count);
    check_weights(weights, static_cast<std::uint32_t>(leaf_count));

    const bool has_measures = j.contains("measures");
    if (has_measures) {
        std::vector<double> measures;
        try {
            measures = j.at("measures").get<std::vector<double>>();
        } catch (const std::exception& e) {
            throw TreeError(std::string("measures parse failure: ") + e.what());
        }
        std::size_t pos = 0;
        attach_measures(root, measures, &pos);
        if (pos != measures.size())
            throw TreeError("measures field longer than the node count");
        if (options.validate) {
            std::uint32_t next_leaf = 0;
            CubeId dfs_id = 0;
            validate_stored_measures(root, weights, &next_leaf, &dfs_id);
        }
    }

    int collapsed = 0;
    collapse_unary(root, options.strict_unary, &collapsed);
    if (options.use_stored_measures && collapsed > 0)
        throw TreeError("use_stored_measures requires a tree without unary chains");
    return assemble(root, weights, options.use_stored_measures && has_measures);
}

DyadicTree load_tree(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TreeError("cannot open tree file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return tree_from_json_text(buf.str(), options);
}

std::string tree_to_json_text(const DyadicTree& tree) {
    json j;
    j["leaf_weights"] = json::array();
    for (std::uint32_t i = 0; i < tree.leaf_count(); ++i)
        j["leaf_weights"].push_back(tree.leaf_measure(i));
    j["structure"] = structure_to_json(tree, tree.root());
    return j.dump(2) + "\n";
}

void save_tree(const DyadicTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TreeError("cannot write tree file: " + path);
    out << tree_to_json_text(tree);
}

TreeStats tree_stats(const DyadicTree& tree) {
    TreeStats stats;
    stats.growth_eps = std::numeric_limits<double>::infinity();
    bool any = false;
    for (CubeId q : tree.internal_cubes()) {
        const CubeRecord& rec = tree.cube(q);
        stats.max_children = std::max<int>(stats.max_children,
                                           static_cast<int>(rec.children.size()));
        for (CubeId c : rec.children) {
            const double ratio = rec.measure / tree.cube(c).measure;
            stats.dyadic_doubling = std::max(stats.dyadic_doubling, ratio);
            stats.growth_eps = std::min(stats.growth_eps, ratio - 1.0);
            any = true;
        }
    }
    if (!any) {
        stats.growth_eps = 0.0;
    }
    return stats;
}

StructureCheck verify_dyadic(const DyadicTree& tree) {
    StructureCheck check;
    auto fail = [&check](std::string msg) {
        check.pass = false;
        check.failures.push_back(std::move(msg));
    };

    const std::uint32_t n_cubes = tree.cube_count();
    const std::uint32_t n_leaves = tree.leaf_count();
    if (n_cubes == 0) {
        fail("empty tree");
        return check;
    }

    std::uint32_t roots = 0;
    for (CubeId id = 0; id < n_cubes; ++id) {
        const CubeRecord& rec = tree.cube(id);
        if (rec.parent == kInvalidCube) {
            ++roots;
            if (rec.level != 0) fail("root cube " + std::to_string(id) + " has level != 0");
        } else {
            const CubeRecord& parent = tree.cube(rec.parent);
            if (parent.level >= rec.level)
                fail("parent of cube " + std::to_string(id) +
                     " does not have a smaller level");
            if (rec.level != parent.level + 1)
                fail("cube " + std::to_string(id) + ": level != parent level + 1");
            if (rec.pos_in_parent >= parent.children.size() ||
                parent.children[rec.pos_in_parent] != id)
                fail("cube " + std::to_string(id) + ": parent/child links inconsistent");
            // child spans nest inside the parent span
            if (rec.leaf_begin < parent.leaf_begin || rec.leaf_end > parent.leaf_end)
                fail("nesting broken: cube " + std::to_string(id) +
                     " leaf span not nested in its parent");
        }

        if (!(rec.measure > 0.0) || !std::isfinite(rec.measure))
            fail("cube " + std::to_string(id) + " has nonpositive measure");

        if (rec.is_leaf()) {
            if (rec.leaf_count() != 1)
                fail("leaf cube " + std::to_string(id) + " spans != 1 leaf");
        } else {
            if (rec.children.size() < 2)
                fail("cube " + std::to_string(id) +
                     " has a single child (tree not normalized)");
            // children partition the parent span in order
            std::uint32_t cursor = rec.leaf_begin;
            double sum = 0.0;
            for (CubeId c : rec.children) {
                const CubeRecord& child = tree.cube(c);
                if (child.leaf_begin != cursor)
                    fail("children of cube " + std::to_string(id) +
                         " do not partition its leaf span");
                cursor = child.leaf_end;
                sum += child.measure;
            }
            if (cursor != rec.leaf_end)
                fail("coverage broken: children of cube " + std::to_string(id) +
                     " do not cover its leaf span");
            if (std::abs(rec.measure - sum) > 1e-12 * std::max(1.0, std::abs(sum)))
                fail("measure additivity violated at cube " + std::to_string(id));
        }
    }
    if (roots != 1) fail("tree must have exactly one root");

    // per level: cubes at level j plus shallower leaves tile [0, n)
    for (int j = 0; j <= tree.depth(); ++j) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> spans;
        for (CubeId id = 0; id < n_cubes; ++id) {
            const CubeRecord& rec = tree.cube(id);
            if (rec.level == j || (rec.is_leaf() && rec.level < j))
                spans.emplace_back(rec.leaf_begin, rec.leaf_end);
        }
        std::sort(spans.begin(), spans.end());
        std::uint32_t cursor = 0;
        bool ok = true;
        for (const auto& [b, e] : spans) {
            if (b != cursor) {
                ok = false;
                break;
            }
            cursor = e;
        }
        if (!ok || cursor != n_leaves)
            fail("level " + std::to_string(j) +
                 " does not tile the leaf set");
    }

    check.stats = tree_stats(tree);
    return check;
}

} // namespace treehaar

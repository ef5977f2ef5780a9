#include "treehaar/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "treehaar/parallel.hpp"
#include "treehaar/rng.hpp"

#include <nlohmann/json.hpp>

namespace treehaar {

namespace {

using json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string read_text_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(std::string("cannot open ") + what + ": " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << text;
}

// ---- config (de)serialization ----------------------------------------------

TreeSpec tree_spec_from_json(const json& j) {
    TreeSpec spec;
    const std::string kind = j.value("kind", "uniform");
    if (kind == "uniform")
        spec.kind = TreeSpec::Kind::uniform;
    else if (kind == "random")
        spec.kind = TreeSpec::Kind::random;
    else if (kind == "file")
        spec.kind = TreeSpec::Kind::file;
    else
        throw Error("config tree.kind must be uniform | random | file");
    spec.depth = j.value("depth", spec.depth);
    spec.branching = j.value("branching", spec.branching);
    spec.weight_rule = j.value("weight_rule", spec.weight_rule);
    if (j.contains("weights")) spec.weights = j.at("weights").get<std::vector<double>>();
    spec.seed = j.value("seed", spec.seed);
    spec.branching_min = j.value("branching_min", spec.branching_min);
    spec.branching_max = j.value("branching_max", spec.branching_max);
    spec.weight_law = j.value("weight_law", spec.weight_law);
    spec.law_lo = j.value("law_lo", spec.law_lo);
    spec.law_hi = j.value("law_hi", spec.law_hi);
    spec.early_leaf_prob = j.value("early_leaf_prob", spec.early_leaf_prob);
    spec.path = j.value("path", spec.path);
    spec.strict_unary = j.value("strict_unary", spec.strict_unary);
    spec.validate = j.value("validate", spec.validate);
    spec.use_stored_measures = j.value("use_stored_measures", spec.use_stored_measures);
    if (spec.kind == TreeSpec::Kind::uniform && spec.weight_rule != "equal" &&
        spec.weight_rule != "listed")
        throw Error("config tree.weight_rule must be equal | listed");
    if (spec.kind == TreeSpec::Kind::uniform && spec.weight_rule == "listed" &&
        spec.weights.empty())
        throw Error("config tree.weight_rule = listed requires tree.weights");
    return spec;
}

json tree_spec_to_json(const TreeSpec& spec) {
    json j;
    switch (spec.kind) {
        case TreeSpec::Kind::uniform:
            j["kind"] = "uniform";
            j["depth"] = spec.depth;
            j["branching"] = spec.branching;
            j["weight_rule"] = spec.weight_rule;
            if (!spec.weights.empty()) j["weights"] = spec.weights;
            break;
        case TreeSpec::Kind::random:
            j["kind"] = "random";
            j["depth"] = spec.depth;
            j["seed"] = spec.seed;
            j["branching_min"] = spec.branching_min;
            j["branching_max"] = spec.branching_max;
            j["weight_law"] = spec.weight_law;
            j["law_lo"] = spec.law_lo;
            j["law_hi"] = spec.law_hi;
            j["early_leaf_prob"] = spec.early_leaf_prob;
            break;
        case TreeSpec::Kind::file:
            j["kind"] = "file";
            j["path"] = spec.path;
            j["strict_unary"] = spec.strict_unary;
            j["validate"] = spec.validate;
            j["use_stored_measures"] = spec.use_stored_measures;
            break;
    }
    return j;
}

HaarSpec haar_spec_from_json(const json& j) {
    HaarSpec spec;
    spec.strategy = j.value("strategy", spec.strategy);
    if (spec.strategy != "rotated-helmert" && spec.strategy != "classical-binary")
        throw Error("config haar.strategy must be rotated-helmert | classical-binary");
    spec.seed = j.value("seed", spec.seed);
    spec.nonvanish_tol = j.value("nonvanish_tol", spec.nonvanish_tol);
    return spec;
}

json haar_spec_to_json(const HaarSpec& spec) {
    json j;
    j["strategy"] = spec.strategy;
    j["seed"] = spec.seed;
    j["nonvanish_tol"] = spec.nonvanish_tol;
    return j;
}

SymbolSpec symbol_spec_from_json(const json& j) {
    SymbolSpec spec;
    const std::string kind = j.value("kind", "petermichl");
    if (kind == "constant")
        spec.kind = SymbolSpec::Kind::constant;
    else if (kind == "petermichl")
        spec.kind = SymbolSpec::Kind::petermichl;
    else if (kind == "petermichl-classic")
        spec.kind = SymbolSpec::Kind::petermichl_classic;
    else if (kind == "variable-file")
        spec.kind = SymbolSpec::Kind::variable_file;
    else
        throw Error("config symbol.kind must be constant | petermichl | "
                    "petermichl-classic | variable-file");
    spec.constant_default = j.value("default", spec.constant_default);
    if (j.contains("entries")) {
        for (const auto& e : j.at("entries")) {
            SymbolEntry entry;
            entry.cube = e.at("cube").get<std::uint32_t>();
            entry.index = e.at("index").get<std::uint32_t>();
            entry.value = e.at("value").get<double>();
            spec.constant_entries.push_back(entry);
        }
    }
    spec.alphas = j.value("alphas", spec.alphas);
    spec.path = j.value("path", spec.path);
    return spec;
}

json symbol_spec_to_json(const SymbolSpec& spec) {
    json j;
    switch (spec.kind) {
        case SymbolSpec::Kind::constant: {
            j["kind"] = "constant";
            j["default"] = spec.constant_default;
            if (!spec.constant_entries.empty()) {
                j["entries"] = json::array();
                for (const auto& e : spec.constant_entries) {
                    json je;
                    je["cube"] = e.cube;
                    je["index"] = e.index;
                    je["value"] = e.value;
                    j["entries"].push_back(std::move(je));
                }
            }
            break;
        }
        case SymbolSpec::Kind::petermichl:
            j["kind"] = "petermichl";
            j["alphas"] = spec.alphas;
            break;
        case SymbolSpec::Kind::petermichl_classic:
            j["kind"] = "petermichl-classic";
            break;
        case SymbolSpec::Kind::variable_file:
            j["kind"] = "variable-file";
            j["path"] = spec.path;
            break;
    }
    return j;
}

CertifySpec certify_spec_from_json(const json& j) {
    CertifySpec spec;
    if (j.contains("checks")) spec.checks = j.at("checks").get<std::vector<std::string>>();
    spec.triple_scan_limit = j.value("triple_scan_limit", spec.triple_scan_limit);
    spec.dense_limit = j.value("dense_limit", spec.dense_limit);
    spec.samples = j.value("samples", spec.samples);
    if (j.contains("depths")) spec.depths = j.at("depths").get<std::vector<int>>();
    spec.seed = j.value("seed", spec.seed);
    spec.trials = j.value("trials", spec.trials);
    spec.probe_trials = j.value("probe_trials", spec.probe_trials);
    spec.norm_iterations = j.value("norm_iterations", spec.norm_iterations);
    spec.stability_tol = j.value("stability_tol", spec.stability_tol);
    return spec;
}

json certify_spec_to_json(const CertifySpec& spec) {
    json j;
    if (!spec.checks.empty()) j["checks"] = spec.checks;
    j["triple_scan_limit"] = spec.triple_scan_limit;
    j["dense_limit"] = spec.dense_limit;
    j["samples"] = spec.samples;
    if (!spec.depths.empty()) j["depths"] = spec.depths;
    j["seed"] = spec.seed;
    j["trials"] = spec.trials;
    j["probe_trials"] = spec.probe_trials;
    j["norm_iterations"] = spec.norm_iterations;
    j["stability_tol"] = spec.stability_tol;
    return j;
}

json config_to_json(const ExperimentConfig& config) {
    json j;
    j["tree"] = tree_spec_to_json(config.tree);
    j["haar"] = haar_spec_to_json(config.haar);
    j["symbol"] = symbol_spec_to_json(config.symbol);
    j["certify"] = certify_spec_to_json(config.certify);
    if (!config.output_dir.empty()) j["output"] = {{"dir", config.output_dir}};
    return j;
}

// provenance echo: the config plus any command-line seed override, so every
// seed that fed the run is recorded in the artifact
json config_echo(const ExperimentConfig& config, const CommandContext& ctx) {
    json j = config_to_json(config);
    if (ctx.seed_override) j["seed_override"] = *ctx.seed_override;
    return j;
}

std::string config_label(const ExperimentConfig& config) {
    std::string label;
    switch (config.tree.kind) {
        case TreeSpec::Kind::uniform:
            label = "uniform-b" + std::to_string(config.tree.branching) + "-d" +
                    std::to_string(config.tree.depth);
            break;
        case TreeSpec::Kind::random:
            label = "random-s" + std::to_string(config.tree.seed) + "-d" +
                    std::to_string(config.tree.depth);
            break;
        case TreeSpec::Kind::file:
            label = "file-" + std::filesystem::path(config.tree.path).stem().string();
            break;
    }
    switch (config.symbol.kind) {
        case SymbolSpec::Kind::constant: label += "+constant"; break;
        case SymbolSpec::Kind::petermichl: label += "+petermichl-" + config.symbol.alphas; break;
        case SymbolSpec::Kind::petermichl_classic: label += "+petermichl-classic"; break;
        case SymbolSpec::Kind::variable_file: label += "+variable"; break;
    }
    return label;
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw Error(std::string("config parse failure: ") + e.what());
    }
    ExperimentConfig config;
    if (j.contains("tree")) config.tree = tree_spec_from_json(j.at("tree"));
    if (j.contains("haar")) config.haar = haar_spec_from_json(j.at("haar"));
    if (j.contains("symbol")) config.symbol = symbol_spec_from_json(j.at("symbol"));
    if (j.contains("certify")) config.certify = certify_spec_from_json(j.at("certify"));
    if (j.contains("output")) config.output_dir = j.at("output").value("dir", "");
    return config;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_json_text(read_text_file(path, "config"));
}

std::string ExperimentConfig::to_json_text() const {
    return config_to_json(*this).dump(2) + "\n";
}

DyadicTree make_tree(const TreeSpec& spec, std::optional<std::uint64_t> seed_override) {
    switch (spec.kind) {
        case TreeSpec::Kind::uniform:
            if (spec.weight_rule == "listed") {
                if (spec.weights.empty())
                    throw Error("tree spec: leaf_weight_rule `listed` requires weights");
                return build_uniform(spec.depth, spec.branching, spec.weights);
            }
            return build_uniform(spec.depth, spec.branching);
        case TreeSpec::Kind::random: {
            WeightLaw law;
            if (spec.weight_law == "equal")
                law.kind = WeightLaw::Kind::equal;
            else if (spec.weight_law == "uniform")
                law.kind = WeightLaw::Kind::uniform;
            else if (spec.weight_law == "log-uniform")
                law.kind = WeightLaw::Kind::log_uniform;
            else
                throw Error("tree spec: weight_law must be equal | uniform | log-uniform");
            law.lo = spec.law_lo;
            law.hi = spec.law_hi;
            return build_random(seed_override.value_or(spec.seed), spec.depth,
                                spec.branching_min, spec.branching_max, law,
                                spec.early_leaf_prob);
        }
        case TreeSpec::Kind::file: {
            LoadOptions options;
            options.strict_unary = spec.strict_unary;
            options.validate = spec.validate;
            options.use_stored_measures = spec.use_stored_measures;
            return load_tree(spec.path, options);
        }
    }
    throw Error("unreachable tree spec kind");
}

HaarSystem make_haar(const DyadicTree& tree, const HaarSpec& spec,
                     std::optional<std::uint64_t> seed_override) {
    const HaarStrategy strategy = spec.strategy == "classical-binary"
                                      ? HaarStrategy::classical_binary
                                      : HaarStrategy::rotated_helmert;
    return build_haar(tree, strategy, seed_override.value_or(spec.seed), spec.nonvanish_tol);
}

Symbol make_symbol(const DyadicTree& tree, const HaarSystem& system, const SymbolSpec& spec,
                   std::optional<AlphaSequence>* alphas_out) {
    if (alphas_out) alphas_out->reset();
    switch (spec.kind) {
        case SymbolSpec::Kind::constant: {
            std::vector<double> values(system.function_count(), spec.constant_default);
            for (const auto& e : spec.constant_entries) {
                if (e.cube >= tree.cube_count() || e.index >= system.count_on(e.cube))
                    throw Error("symbol entry out of range: cube " + std::to_string(e.cube) +
                                " index " + std::to_string(e.index));
                values[system.first_function(e.cube) + e.index] = e.value;
            }
            return Symbol::constant(std::move(values));
        }
        case SymbolSpec::Kind::petermichl: {
            AlphaSequence alphas;
            if (spec.alphas == "plus-minus")
                alphas = alphas_plus_minus(tree, system);
            else if (spec.alphas == "ones")
                alphas = alphas_ones(system);
            else if (spec.alphas.rfind("random:", 0) == 0)
                alphas = alphas_random(system,
                                       std::stoull(spec.alphas.substr(7)));
            else if (spec.alphas.rfind("file:", 0) == 0)
                alphas = alphas_from_json_text(
                    tree, system, read_text_file(spec.alphas.substr(5), "alpha file"));
            else
                throw Error("symbol spec: alphas must be plus-minus | ones | "
                            "random:<seed> | file:<path>");
            if (alphas_out) *alphas_out = alphas;
            return petermichl_symbol(tree, system, alphas);
        }
        case SymbolSpec::Kind::petermichl_classic:
            return petermichl_classic_symbol(tree, system);
        case SymbolSpec::Kind::variable_file:
            return symbol_from_json_text(tree, system,
                                         read_text_file(spec.path, "symbol file"));
    }
    throw Error("unreachable symbol spec kind");
}

namespace {

bool check_enabled(const CertifySpec& spec, const std::string& name) {
    if (spec.checks.empty()) return true;
    return std::find(spec.checks.begin(), spec.checks.end(), name) != spec.checks.end();
}

} // namespace

CertOutcome run_certification(const ExperimentConfig& config, const CommandContext& ctx) {
    set_max_threads(ctx.threads);
    CertOutcome outcome;
    json report;
    report["label"] = config_label(config);

    const DyadicTree tree = make_tree(config.tree, ctx.seed_override);
    const HaarSystem system = make_haar(tree, config.haar, ctx.seed_override);
    std::optional<AlphaSequence> alphas;
    const Symbol symbol = make_symbol(tree, system, config.symbol, &alphas);

    CertifyLimits limits;
    limits.dense_limit = config.certify.dense_limit;
    limits.triple_scan_limit = config.certify.triple_scan_limit;
    limits.samples = config.certify.samples;
    limits.seed = ctx.seed_override.value_or(config.certify.seed);

    const StructureCheck structure = verify_dyadic(tree);
    const TreeStats& stats = structure.stats;
    report["tree"] = {{"leaves", tree.leaf_count()},
                      {"cubes", tree.cube_count()},
                      {"depth", tree.depth()},
                      {"total_measure", tree.total_measure()},
                      {"max_children", stats.max_children},
                      {"dyadic_doubling", stats.dyadic_doubling},
                      {"growth_eps", stats.growth_eps}};

    auto add_check = [&outcome](const std::string& name, bool pass, std::string detail) {
        outcome.verdicts.push_back({name, pass, std::move(detail)});
        if (!pass) outcome.all_pass = false;
    };

    if (check_enabled(config.certify, "structure")) {
        std::string detail = structure.pass ? "all invariants hold"
                                            : structure.failures.front();
        add_check("structure", structure.pass, std::move(detail));
    }

    // metric suite
    UltrametricReport ultra;
    if (check_enabled(config.certify, "ultrametric")) {
        const ScanMode mode =
            tree.leaf_count() <= 2048 ? ScanMode::exhaustive : ScanMode::sampled;
        ultra = verify_ultrametric(tree, mode, limits.seed, limits.samples);
        std::string detail = "checked " + std::to_string(ultra.triples_checked) + " triples";
        if (!ultra.pass)
            detail += "; witness (" + std::to_string(ultra.x) + "," + std::to_string(ultra.y) +
                      "," + std::to_string(ultra.z) + ") violation " + fmt6(ultra.violation);
        add_check("ultrametric", ultra.pass, detail);
        report["metric"]["ultrametric"] = {{"pass", ultra.pass},
                                           {"triples", ultra.triples_checked},
                                           {"violation", ultra.violation},
                                           {"witness", {ultra.x, ultra.y, ultra.z}}};
    }
    if (check_enabled(config.certify, "normality")) {
        const NormalityReport normal = verify_normal(tree);
        const bool pass = normal.ball_equals_cube && normal.sup_ratio <= 1.0 + 1e-9 &&
                          normal.inf_ratio * stats.dyadic_doubling > 1.0 - 1e-9;
        add_check("normality", pass,
                  "sup " + fmt6(normal.sup_ratio) + ", inf " + fmt6(normal.inf_ratio) +
                      ", 1/C " + fmt6(1.0 / stats.dyadic_doubling));
        report["metric"]["normality"] = {{"sup_ratio", normal.sup_ratio},
                                         {"inf_ratio", normal.inf_ratio},
                                         {"ball_equals_cube", normal.ball_equals_cube},
                                         {"pairs", normal.pairs_checked},
                                         {"r_min", normal.r_min},
                                         {"r_max", normal.r_max}};
    }
    if (check_enabled(config.certify, "char-lipschitz")) {
        const double c = char_lipschitz_constant(tree);
        add_check("char-lipschitz", c <= 1.0 + 1e-12, "constant " + fmt6(c));
        report["metric"]["char_lipschitz"] = c;
    }

    // haar suite
    const HaarCheck haar = verify_haar(tree, system);
    const double haar_lip = haar_lipschitz_constant(tree, system);
    report["haar"] = {{"functions", system.function_count()},
                      {"c1", haar.c1},
                      {"c2", haar.c2},
                      {"h5_constant", haar.h5_constant},
                      {"mean_residual", haar.max_mean_residual},
                      {"norm_residual", haar.max_norm_residual},
                      {"gram_residual", haar.max_gram_residual},
                      {"gram_global", haar.gram_global},
                      {"lipschitz", haar_lip}};
    if (check_enabled(config.certify, "haar"))
        add_check("haar", haar.pass,
                  "gram residual " + fmt6(haar.max_gram_residual) + ", C2/C1 " +
                      fmt6(haar.h5_constant));

    // symbol hypotheses
    const SymbolConditionReport cond = symbol_conditions(tree, system, symbol, limits);
    report["symbol"] = {{"kind", symbol.kind() == Symbol::Kind::constant ? "constant"
                                                                         : "variable"},
                        {"ba", cond.ba},
                        {"bb", cond.bb},
                        {"pairs", cond.pairs},
                        {"exact", cond.exact},
                        {"empty_scan", cond.empty}};
    if (check_enabled(config.certify, "symbol")) {
        bool pass = std::isfinite(cond.ba) && std::isfinite(cond.bb);
        std::string detail = "Ba " + fmt6(cond.ba) + ", Bb " + fmt6(cond.bb);
        if (symbol.kind() == Symbol::Kind::constant) {
            pass = pass && cond.bb == 0.0;
            detail += " (constant symbol: Bb must be exactly 0)";
        }
        if (config.symbol.kind == SymbolSpec::Kind::petermichl && alphas) {
            const double ba_bound = symbol_ba_bound(stats, haar, alphas->sup);
            const double bb_bound = symbol_bb_bound(stats, haar, alphas->sup);
            pass = pass && cond.ba <= ba_bound * (1.0 + 1e-9) &&
                   cond.bb <= bb_bound * (1.0 + 1e-9);
            detail += ", bounds " + fmt6(ba_bound) + "/" + fmt6(bb_bound);
            report["symbol"]["ba_bound"] = ba_bound;
            report["symbol"]["bb_bound"] = bb_bound;
        }
        add_check("symbol", pass, detail);
    }

    // CZ kernel checks need the dense kernel
    const bool dense_ok = tree.leaf_count() <= limits.dense_limit;
    if (!dense_ok) {
        outcome.skipped.push_back("kernel-size");
        outcome.skipped.push_back("smoothness");
        outcome.skipped.push_back("weak-integral");
    } else {
        const KernelMatrix kernel = assemble_kernel(tree, system, symbol, limits.dense_limit);
        if (check_enabled(config.certify, "kernel-size")) {
            const SizeReport size = size_constant(tree, kernel);
            add_check("kernel-size", std::isfinite(size.c),
                      "size constant " + fmt6(size.c));
            report["cz"]["size_c"] = size.c;
            report["cz"]["size_witness"] = {size.x, size.y};
            report["cz"]["size_empty"] = size.empty;
        }
        if (check_enabled(config.certify, "smoothness")) {
            const SmoothnessReport smooth = smoothness_constants(tree, kernel, limits);
            const bool pass = smooth.lemma_ok && std::isfinite(smooth.cx) &&
                              std::isfinite(smooth.cy);
            std::string detail = "Cx " + fmt6(smooth.cx) + ", Cy " + fmt6(smooth.cy) +
                                 ", gamma_hat " + fmt6(smooth.gamma_hat);
            if (smooth.empty) detail += " (empty admissible set)";
            if (!smooth.lemma_ok)
                detail += "; lemma witness (" + std::to_string(smooth.lemma_x) + "," +
                          std::to_string(smooth.lemma_xp) + "," +
                          std::to_string(smooth.lemma_y) + ")";
            add_check("smoothness", pass, detail);
            report["cz"]["smooth_cx"] = smooth.cx;
            report["cz"]["smooth_cy"] = smooth.cy;
            report["cz"]["gamma_hat"] = smooth.gamma_hat;
            report["cz"]["lemma_ok"] = smooth.lemma_ok;
            report["cz"]["admissible_triples"] = smooth.admissible;
            report["cz"]["smooth_empty"] = smooth.empty;
            report["cz"]["exhaustive"] = smooth.exhaustive;
        }
        if (check_enabled(config.certify, "weak-integral")) {
            try {
                const double residual = weak_integral_identity(
                    tree, system, symbol, kernel, config.certify.trials, limits.seed);
                add_check("weak-integral", residual <= 1e-9, "residual " + fmt6(residual));
                report["cz"]["weak_integral_residual"] = residual;
            } catch (const Error& e) {
                // vacuous on trees whose branching cubes are all nested
                outcome.skipped.push_back(std::string("weak-integral: ") + e.what());
            }
        }
    }

    // shift-specific identities
    if (config.symbol.kind == SymbolSpec::Kind::petermichl && alphas) {
        if (check_enabled(config.certify, "equivalence")) {
            Rng rng = Rng(limits.seed).fork(0xe9);
            double worst = 0.0;
            for (int t = 0; t < 20; ++t) {
                const LeafFunction f = random_leaf_function(tree, rng, true);
                const LeafFunction a = petermichl_apply(tree, system, *alphas, f);
                const LeafFunction b = apply_multiplier(tree, system, symbol, f);
                double diff = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i)
                    diff = std::max(diff, std::abs(a[i] - b[i]));
                const double scale = std::max(1.0, norm2(tree, a));
                worst = std::max(worst, diff / scale);
            }
            add_check("equivalence", worst <= 1e-10, "max residual " + fmt6(worst));
            report["shift"]["equivalence_residual"] = worst;
        }
        if (check_enabled(config.certify, "adjoint")) {
            Rng rng = Rng(limits.seed).fork(0xad);
            double worst = 0.0;
            for (int t = 0; t < 20; ++t) {
                LeafFunction f = random_leaf_function(tree, rng, true);
                LeafFunction g = random_leaf_function(tree, rng, true);
                const double nf = norm2(tree, f), ng = norm2(tree, g);
                if (nf <= 0.0 || ng <= 0.0) continue;
                for (auto& v : f.values) v /= nf;
                for (auto& v : g.values) v /= ng;
                const double lhs = dot(tree, petermichl_apply(tree, system, *alphas, f), g);
                const double rhs =
                    dot(tree, f, petermichl_adjoint_apply(tree, system, *alphas, g));
                worst = std::max(worst, std::abs(lhs - rhs));
            }
            add_check("adjoint", worst <= 1e-10, "max residual " + fmt6(worst));
            report["shift"]["adjoint_residual"] = worst;
        }
        if (check_enabled(config.certify, "compose")) try {
            const ComposeReport compose = petermichl_compose_diag(tree, system, *alphas);
            const bool pass = compose.structure_residual <= 1e-10 &&
                              compose.formula_residual <= 1e-10 &&
                              (!compose.unimodular || compose.bracket_ok);
            double diag_min = 0.0, diag_max = 0.0;
            bool first = true;
            json diag_entries = json::array();
            for (CubeId q : tree.internal_cubes()) {
                bool interior = false;
                for (CubeId r : tree.cube(q).children)
                    if (!tree.cube(r).is_leaf()) interior = true;
                json entry;
                entry["cube"] = q;
                entry["c"] = compose.diag[q];
                entry["interior"] = interior;
                diag_entries.push_back(std::move(entry));
                if (!interior) continue;
                if (first || compose.diag[q] < diag_min) diag_min = compose.diag[q];
                if (first || compose.diag[q] > diag_max) diag_max = compose.diag[q];
                first = false;
            }
            add_check("compose", pass,
                      "interior diagonal in [" + fmt6(diag_min) + ", " + fmt6(diag_max) +
                          "], structure residual " + fmt6(compose.structure_residual));
            report["shift"]["compose"] = {
                {"structure_residual", compose.structure_residual},
                {"offblock_residual", compose.offblock_residual},
                {"formula_residual", compose.formula_residual},
                {"unimodular", compose.unimodular},
                {"bracket_ok", compose.bracket_ok},
                {"interior_diag_min", diag_min},
                {"interior_diag_max", diag_max},
                {"diag", diag_entries}};
        } catch (const Error& e) {
            outcome.skipped.push_back(std::string("compose: ") + e.what());
        }
    }

    // norm probes
    if (check_enabled(config.certify, "norms")) {
        const double l2 = l2_norm_estimate(tree, system, symbol,
                                           config.certify.norm_iterations, limits.seed);
        const double lp2 = empirical_lp_probe(tree, system, symbol, 2.0,
                                              config.certify.probe_trials, limits.seed);
        const double w11 = weak_11_probe(tree, system, symbol,
                                         config.certify.probe_trials, limits.seed);
        const bool within_bound = l2 <= cond.ba * (1.0 + 1e-6) || cond.ba == 0.0;
        bool pass = std::isfinite(l2) && std::isfinite(lp2) && std::isfinite(w11) &&
                    lp2 <= l2 * 1.05 + 1e-12;
        std::string detail = "l2 " + fmt6(l2) + ", lp2 " + fmt6(lp2) + ", weak11 " +
                             fmt6(w11);
        if (symbol.kind() == Symbol::Kind::constant) {
            pass = pass && std::abs(l2 - cond.ba) <= 1e-6 * std::max(1.0, cond.ba);
            detail += " (diagonal: l2 must equal sup |eta|)";
        }
        add_check("norms", pass, detail);
        report["norms"] = {{"l2_estimate", l2},
                           {"lp2_probe", lp2},
                           {"weak11_probe", w11},
                           {"l2_within_symbol_bound", within_bound}};
    }

    report["checks"] = json::array();
    for (const auto& check : outcome.verdicts) {
        json c;
        c["name"] = check.name;
        c["pass"] = check.pass;
        c["detail"] = check.detail;
        report["checks"].push_back(std::move(c));
    }
    report["skipped"] = outcome.skipped;
    report["all_pass"] = outcome.all_pass;
    report["config"] = config_echo(config, ctx);

    outcome.report_json = report.dump(2) + "\n";

    // flat CSV mirror
    std::ostringstream csv;
    csv << "label,leaves,depth,max_children,dyadic_doubling,growth_eps,c1,c2,"
           "h5_constant,haar_lip,symbol_ba,symbol_bb,all_pass\n";
    csv << config_label(config) << "," << tree.leaf_count() << "," << tree.depth() << ","
        << stats.max_children << "," << fmt17(stats.dyadic_doubling) << ","
        << fmt17(stats.growth_eps) << "," << fmt17(haar.c1) << "," << fmt17(haar.c2) << ","
        << fmt17(haar.h5_constant) << "," << fmt17(haar_lip) << "," << fmt17(cond.ba) << ","
        << fmt17(cond.bb) << "," << (outcome.all_pass ? 1 : 0) << "\n";
    outcome.report_csv = csv.str();
    return outcome;
}

int cmd_build(const ExperimentConfig& config, const CommandContext& ctx) {
    try {
        set_max_threads(ctx.threads);
        const DyadicTree tree = make_tree(config.tree, ctx.seed_override);
        const HaarSystem system = make_haar(tree, config.haar, ctx.seed_override);
        const StructureCheck structure = verify_dyadic(tree);
        const HaarCheck haar = verify_haar(tree, system);

        std::filesystem::create_directories(ctx.out_dir);
        save_tree(tree, ctx.out_dir + "/tree.json");
        write_text_file(ctx.out_dir + "/haar.json", haar_to_json_text(tree, system));

        json manifest;
        manifest["label"] = config_label(config);
        manifest["tree"] = {{"leaves", tree.leaf_count()},
                            {"cubes", tree.cube_count()},
                            {"depth", tree.depth()},
                            {"total_measure", tree.total_measure()},
                            {"max_children", structure.stats.max_children},
                            {"dyadic_doubling", structure.stats.dyadic_doubling},
                            {"growth_eps", structure.stats.growth_eps},
                            {"structure_pass", structure.pass}};
        manifest["haar"] = {{"functions", system.function_count()},
                            {"c1", haar.c1},
                            {"c2", haar.c2},
                            {"h5_constant", haar.h5_constant},
                            {"mean_residual", haar.max_mean_residual},
                            {"gram_residual", haar.max_gram_residual},
                            {"lipschitz", haar_lipschitz_constant(tree, system)}};
        manifest["config"] = config_echo(config, ctx);
        write_text_file(ctx.out_dir + "/manifest.json", manifest.dump(2) + "\n");
        return structure.pass && haar.pass ? kExitOk : kExitVerdictFailure;
    } catch (const std::exception& e) {
        std::cerr << "build: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cmd_certify(const ExperimentConfig& config, const CommandContext& ctx) {
    CertOutcome outcome;
    try {
        outcome = run_certification(config, ctx);
        std::filesystem::create_directories(ctx.out_dir);
        write_text_file(ctx.out_dir + "/report.json", outcome.report_json);
        write_text_file(ctx.out_dir + "/report.csv", outcome.report_csv);
    } catch (const std::exception& e) {
        std::cerr << "certify: " << e.what() << "\n";
        return kExitConfigError;
    }
    if (!outcome.all_pass) {
        std::cerr << "certify: verdict failures:\n";
        for (const auto& check : outcome.verdicts)
            if (!check.pass)
                std::cerr << "  " << check.name << ": " << check.detail << "\n";
        return kExitVerdictFailure;
    }
    return kExitOk;
}

int cmd_apply(const ExperimentConfig& config, const CommandContext& ctx,
              const std::string& input_path, const std::string& output_path) {
    try {
        set_max_threads(ctx.threads);
        const DyadicTree tree = make_tree(config.tree, ctx.seed_override);
        const HaarSystem system = make_haar(tree, config.haar, ctx.seed_override);
        std::optional<AlphaSequence> alphas;
        const Symbol symbol = make_symbol(tree, system, config.symbol, &alphas);

        const LeafFunction input = read_function_file(input_path);
        require_size(tree, input);

        // shift configurations apply the shift itself, other symbols T_eta
        const LeafFunction output =
            (config.symbol.kind == SymbolSpec::Kind::petermichl && alphas)
                ? petermichl_apply(tree, system, *alphas, input)
                : apply_multiplier(tree, system, symbol, input);

        write_function_file(output, output_path);

        const HaarCoefficients in_coeffs = analyze(tree, system, input);
        const HaarCoefficients out_coeffs = analyze(tree, system, output);
        json j;
        j["input"] = {{"scaling", in_coeffs.scaling}, {"detail", in_coeffs.detail}};
        j["output"] = {{"scaling", out_coeffs.scaling}, {"detail", out_coeffs.detail}};
        write_text_file(output_path + ".coeffs.json", j.dump(2) + "\n");
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "apply: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cmd_sweep(const ExperimentConfig& config, const CommandContext& ctx) {
    try {
        set_max_threads(ctx.threads);
        if (config.certify.depths.empty())
            throw Error("sweep requires certify.depths in the config");
        if (config.tree.kind == TreeSpec::Kind::file)
            throw Error("sweep requires a buildable (uniform or random) tree spec");

        CertifyLimits limits;
        limits.dense_limit = config.certify.dense_limit;
        limits.triple_scan_limit = config.certify.triple_scan_limit;
        limits.samples = config.certify.samples;
        limits.seed = ctx.seed_override.value_or(config.certify.seed);

        const TreeSpec base = config.tree;
        auto builder = [&base, &ctx](int depth) {
            TreeSpec spec = base;
            spec.depth = depth;
            return make_tree(spec, ctx.seed_override);
        };
        const SymbolSpec symbol_spec = config.symbol;
        auto symbol_maker = [&symbol_spec](const DyadicTree& tree, const HaarSystem& system) {
            return make_symbol(tree, system, symbol_spec, nullptr);
        };

        const HaarStrategy strategy = config.haar.strategy == "classical-binary"
                                          ? HaarStrategy::classical_binary
                                          : HaarStrategy::rotated_helmert;
        const std::vector<SweepRow> rows =
            stability_sweep(builder, config.certify.depths, symbol_maker,
                            ctx.seed_override.value_or(config.haar.seed), limits,
                            strategy, config.haar.nonvanish_tol);

        std::ostringstream csv;
        csv << "depth,leaves,size_c,smooth_cx,smooth_cy,gamma_hat,symbol_ba,symbol_bb,"
               "haar_lip,growth_eps,skipped\n";
        for (const SweepRow& row : rows) {
            csv << row.depth << "," << row.leaves << "," << fmt17(row.size_c) << ","
                << fmt17(row.smooth_cx) << "," << fmt17(row.smooth_cy) << ","
                << fmt17(row.gamma_hat) << "," << fmt17(row.symbol_ba) << ","
                << fmt17(row.symbol_bb) << "," << fmt17(row.haar_lip) << ","
                << fmt17(row.growth_eps) << "," << (row.skipped ? 1 : 0) << "\n";
        }

        // tail stability per column over the rows that actually ran
        auto column = [&rows](auto getter) {
            std::vector<double> v;
            for (const SweepRow& row : rows)
                if (!row.skipped) v.push_back(getter(row));
            return v;
        };
        json stability;
        bool stable = true;
        const double tol = config.certify.stability_tol;
        auto record = [&](const char* name, const std::vector<double>& col) {
            const double variation = tail_variation(col);
            stability[name] = variation;
            bool meaningful = false;
            for (double v : col)
                if (v != 0.0) meaningful = true;
            if (meaningful && variation >= tol) stable = false;
        };
        record("size_c", column([](const SweepRow& r) { return r.size_c; }));
        record("smooth_cx", column([](const SweepRow& r) { return r.smooth_cx; }));
        record("smooth_cy", column([](const SweepRow& r) { return r.smooth_cy; }));
        record("symbol_ba", column([](const SweepRow& r) { return r.symbol_ba; }));
        record("symbol_bb", column([](const SweepRow& r) { return r.symbol_bb; }));
        record("haar_lip", column([](const SweepRow& r) { return r.haar_lip; }));

        json j;
        j["label"] = config_label(config);
        j["rows"] = json::array();
        for (const SweepRow& row : rows) {
            json r;
            r["depth"] = row.depth;
            r["leaves"] = row.leaves;
            r["size_c"] = row.size_c;
            r["smooth_cx"] = row.smooth_cx;
            r["smooth_cy"] = row.smooth_cy;
            r["gamma_hat"] = row.gamma_hat;
            r["symbol_ba"] = row.symbol_ba;
            r["symbol_bb"] = row.symbol_bb;
            r["haar_lip"] = row.haar_lip;
            r["growth_eps"] = row.growth_eps;
            r["skipped"] = row.skipped;
            r["smooth_empty"] = row.smooth_empty;
            j["rows"].push_back(std::move(r));
        }
        j["tail_variation"] = stability;
        j["stability_tol"] = tol;
        j["stable"] = stable;
        j["config"] = config_echo(config, ctx);

        std::filesystem::create_directories(ctx.out_dir);
        write_text_file(ctx.out_dir + "/sweep.json", j.dump(2) + "\n");
        write_text_file(ctx.out_dir + "/sweep.csv", csv.str());

        if (!stable) {
            std::cerr << "sweep: tail variation exceeded " << tol << "\n";
            return kExitVerdictFailure;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "sweep: " << e.what() << "\n";
        return kExitConfigError;
    }
}

LeafFunction read_function_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open function file: " + path);
    LeafFunction f;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        while (end && *end == ' ') ++end;
        if (end == line.c_str() || (end && *end != '\0' && *end != '\r'))
            throw Error("function file " + path + ": bad value on line " +
                        std::to_string(lineno));
        f.values.push_back(v);
    }
    return f;
}

void write_function_file(const LeafFunction& f, const std::string& path) {
    std::ostringstream out;
    for (double v : f.values) out << fmt17(v) << "\n";
    write_text_file(path, out.str());
}

} // namespace treehaar

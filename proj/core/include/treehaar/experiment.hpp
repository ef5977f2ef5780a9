#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treehaar/certify.hpp"

namespace treehaar {

// Configuration-driven front end. Everything is JSON in, JSON/CSV out, and
// byte-identical across reruns of the same config (all randomness flows
// through the seeds recorded here).

struct TreeSpec {
    enum class Kind { uniform, random, file };
    Kind kind = Kind::uniform;
    // uniform
    int depth = 3;
    int branching = 2;
    std::string weight_rule = "equal"; // "equal" | "listed"
    std::vector<double> weights;
    // random
    std::uint64_t seed = 1;
    int branching_min = 2;
    int branching_max = 3;
    std::string weight_law = "log-uniform"; // "equal" | "uniform" | "log-uniform"
    double law_lo = 0.5;
    double law_hi = 2.0;
    double early_leaf_prob = 0.0;
    // file
    std::string path;
    bool strict_unary = false;
    bool validate = true;
    bool use_stored_measures = false;
};

struct HaarSpec {
    std::string strategy = "rotated-helmert"; // "classical-binary" | "rotated-helmert"
    std::uint64_t seed = 1;
    double nonvanish_tol = 1e-3;
};

struct SymbolEntry {
    std::uint32_t cube = 0;
    std::uint32_t index = 0;
    double value = 0.0;
};

struct SymbolSpec {
    enum class Kind { constant, petermichl, petermichl_classic, variable_file };
    Kind kind = Kind::petermichl;
    // constant
    double constant_default = 1.0;
    std::vector<SymbolEntry> constant_entries;
    // petermichl
    std::string alphas = "plus-minus"; // "plus-minus" | "ones" | "random:<seed>" | "file:<path>"
    // variable_file
    std::string path;
};

struct CertifySpec {
    std::vector<std::string> checks; // empty = every applicable check
    std::uint32_t triple_scan_limit = 512;
    std::uint32_t dense_limit = 4096;
    std::uint64_t samples = 1'000'000;
    std::vector<int> depths; // sweep depths
    std::uint64_t seed = 42;
    int trials = 50;
    int probe_trials = 200;
    int norm_iterations = 200;
    double stability_tol = 0.10;
};

struct ExperimentConfig {
    TreeSpec tree;
    HaarSpec haar;
    SymbolSpec symbol;
    CertifySpec certify;
    std::string output_dir; // may be overridden on the command line

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    std::string to_json_text() const;
};

struct CommandContext {
    std::string out_dir = ".";
    int threads = 1;
    std::optional<std::uint64_t> seed_override;
};

// Exit codes shared by the library entry points and the CLI binary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerdictFailure = 1;
inline constexpr int kExitConfigError = 2;

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct CertOutcome {
    std::vector<CheckResult> verdicts;
    std::vector<std::string> skipped;
    bool all_pass = true;
    std::string report_json;
    std::string report_csv;
};

/// Builds the configured tree/haar/symbol artifacts in memory.
DyadicTree make_tree(const TreeSpec& spec, std::optional<std::uint64_t> seed_override = {});
HaarSystem make_haar(const DyadicTree& tree, const HaarSpec& spec,
                     std::optional<std::uint64_t> seed_override = {});
Symbol make_symbol(const DyadicTree& tree, const HaarSystem& system, const SymbolSpec& spec,
                   std::optional<AlphaSequence>* alphas_out = nullptr);

/// Runs every enabled certification check; does not touch the filesystem.
CertOutcome run_certification(const ExperimentConfig& config, const CommandContext& ctx);

int cmd_build(const ExperimentConfig& config, const CommandContext& ctx);
int cmd_certify(const ExperimentConfig& config, const CommandContext& ctx);
int cmd_apply(const ExperimentConfig& config, const CommandContext& ctx,
              const std::string& input_path, const std::string& output_path);
int cmd_sweep(const ExperimentConfig& config, const CommandContext& ctx);

/// Newline-delimited decimal values, one per leaf in canonical order.
LeafFunction read_function_file(const std::string& path);
void write_function_file(const LeafFunction& f, const std::string& path);

} // namespace treehaar

// treehaar: dyadic trees, Haar systems, multiplier operators and their
// certification. Subcommands: build | certify | apply | sweep.
//
// Tree file format (JSON):
//   {
//     "leaf_weights": [w0, w1, ...],   // one positive number per leaf,
//                                      // depth-first order
//     "structure": <node>,             // node := 0 (leaf) | [node, ...]
//     "measures": [m0, m1, ...]        // optional, one per node depth-first;
//                                      // validated against additivity
//   }
// Trees above 2^24 leaves are rejected. Unary chains are collapsed on load
// (rejected when tree.strict_unary is set). Function files are
// newline-delimited decimal values, one per leaf in canonical order.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "treehaar/experiment.hpp"

namespace {

std::string default_out_dir(const std::string& flag_value,
                            const treehaar::ExperimentConfig& config) {
    if (!flag_value.empty()) return flag_value;
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv("TREEHAAR_OUT_DIR"); env && *env) return env;
    return ".";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dyadic Haar analysis and operator certification"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir;
    int threads = 1;
    std::int64_t seed_override = -1;

    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (default: config, then $TREEHAAR_OUT_DIR)");
    app.add_option("--threads", threads, "worker threads for certification scans");
    app.add_option("--seed-override", seed_override,
                   "override every configured seed with this value");

    auto* build = app.add_subcommand("build", "build tree and Haar artifacts");
    auto* certify = app.add_subcommand("certify", "run the certification suite");
    auto* apply = app.add_subcommand("apply", "apply the configured operator to a function");
    auto* sweep = app.add_subcommand("sweep", "depth sweep of certified constants");

    std::string input_path, output_path;
    apply->add_option("--input", input_path, "input function file")->required();
    apply->add_option("--output", output_path, "output function file")->required();

    CLI11_PARSE(app, argc, argv);

    treehaar::ExperimentConfig config;
    try {
        config = treehaar::ExperimentConfig::load(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return treehaar::kExitConfigError;
    }

    treehaar::CommandContext ctx;
    ctx.out_dir = default_out_dir(out_dir, config);
    ctx.threads = threads;
    if (seed_override >= 0)
        ctx.seed_override = static_cast<std::uint64_t>(seed_override);

    if (build->parsed()) return treehaar::cmd_build(config, ctx);
    if (certify->parsed()) return treehaar::cmd_certify(config, ctx);
    if (apply->parsed()) return treehaar::cmd_apply(config, ctx, input_path, output_path);
    if (sweep->parsed()) return treehaar::cmd_sweep(config, ctx);
    return treehaar::kExitConfigError;
}

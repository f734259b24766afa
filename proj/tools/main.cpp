// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "isoattn/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"isoattn - deterministic attention-isolation engine for story visualization"};
    app.require_subcommand(1);

    isoattn::PlanOptions plan_options;
    auto* plan = app.add_subcommand(
        "plan", "Parse a story script (or query an LLM endpoint) into a plan file");
    plan->add_option("script", plan_options.script_path, "story script path");
    plan->add_option("--llm", plan_options.llm_storyline,
                     "plan from a free-text storyline via the configured endpoint");
    plan->add_option("--out", plan_options.out_path, "plan output path")
        ->capture_default_str();
    plan->add_option("--config", plan_options.config_path, "run configuration file");

    isoattn::GenerateOptions generate_options;
    auto* generate =
        app.add_subcommand("generate", "Run the denoising pipeline over a plan");
    generate->add_option("plan", generate_options.plan_path, "plan file path")->required();
    generate->add_option("--config", generate_options.config_path, "run configuration file");
    std::optional<uint64_t> seed;
    std::optional<float> lambda;
    generate->add_option("--seed", seed, "override the pipeline seed");
    generate->add_option("--lambda", lambda, "override the branch-merge weight");
    bool dump_attn = false;
    generate->add_flag("--dump-attn", dump_attn, "dump attention matrices as PGM");
    generate->add_option("--out", generate_options.out_dir, "run directory");

    isoattn::AblateOptions ablate_options;
    auto* ablate = app.add_subcommand(
        "ablate", "Run the isolation switch grid and emit a comparison table");
    ablate->add_option("plan", ablate_options.plan_path, "plan file path")->required();
    ablate->add_option("--config", ablate_options.config_path, "run configuration file");
    std::optional<uint64_t> ablate_seed;
    ablate->add_option("--seed", ablate_seed, "override the pipeline seed");
    ablate->add_option("--out", ablate_options.out_dir, "output directory");

    isoattn::InspectOptions inspect_options;
    auto* inspect =
        app.add_subcommand("inspect", "Summarize one character of one scene in a run");
    inspect->add_option("--run", inspect_options.run_dir, "run directory")->required();
    inspect->add_option("--scene", inspect_options.scene, "scene index")->required();
    inspect->add_option("--character", inspect_options.character, "character id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : isoattn::kExitUsageError;
    }

    if (plan->parsed()) {
        return isoattn::cmd_plan(plan_options, std::cout, std::cerr);
    }
    if (generate->parsed()) {
        generate_options.seed = seed;
        generate_options.lambda = lambda;
        if (dump_attn) {
            generate_options.dump_attention = true;
        }
        return isoattn::cmd_generate(generate_options, std::cout, std::cerr);
    }
    if (ablate->parsed()) {
        ablate_options.seed = ablate_seed;
        return isoattn::cmd_ablate(ablate_options, std::cout, std::cerr);
    }
    if (inspect->parsed()) {
        return isoattn::cmd_inspect(inspect_options, std::cout, std::cerr);
    }
    return isoattn::kExitUsageError;
}

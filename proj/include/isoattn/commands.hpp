// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <ostream>
#include <string>

namespace isoattn {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;  // plan/content problems
inline constexpr int kExitUsageError = 2;   // usage/config problems

struct PlanOptions {
    std::string script_path;    // script mode
    std::string llm_storyline;  // llm mode when non-empty
    std::string out_path = "plan.json";
    std::string config_path;
};

struct GenerateOptions {
    std::string plan_path;
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<float> lambda;
    std::optional<bool> dump_attention;
    std::string out_dir;  // overrides config output.directory when non-empty
};

struct AblateOptions {
    std::string plan_path;
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out_dir;
};

struct InspectOptions {
    std::string run_dir;
    int scene = 0;
    int character = 0;
};

int cmd_plan(const PlanOptions& options, std::ostream& out, std::ostream& err);
int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);
int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err);
int cmd_inspect(const InspectOptions& options, std::ostream& out, std::ostream& err);

}  // namespace isoattn

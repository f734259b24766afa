// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "isoattn/pipeline.hpp"

namespace isoattn {

/// Usage/configuration error: maps to exit code 2 at the CLI.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PlannerOptions {
    std::string mode = "script";  // "script" or "llm"
    std::string endpoint;
    std::string template_path;
};

struct OutputOptions {
    std::string directory = "out";
    bool dump_maps = true;
    bool dump_attention = false;
};

struct RunConfig {
    PipelineConfig pipeline;
    PlannerOptions planner;
    OutputOptions output;
};

/// Strict parse: unknown keys are rejected by name, absent keys fall back to
/// defaults, and the resolved configuration is validated.
RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved echo, suitable for embedding in run manifests.
std::string run_config_to_json_text(const RunConfig& config);

void validate_run_config(const RunConfig& config);

}  // namespace isoattn

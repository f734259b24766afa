// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace isoattn {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& section) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) {
            throw ConfigError("config: unknown key '" + key + "' in " + section);
        }
    }
}

template <typename T>
void read_key(const json& obj, const char* key, T& target) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        target = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: key '") + key + "' has the wrong type");
    }
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    reject_unknown_keys(j, {"pipeline", "planner", "output"}, "the top level");

    RunConfig config;
    if (j.contains("pipeline")) {
        const json& p = j.at("pipeline");
        reject_unknown_keys(p,
                            {"h", "w", "d", "d_txt", "T", "seed", "stack", "lambda",
                             "mask_warmup_steps", "extended_enabled", "iso_self", "iso_cross",
                             "reweight"},
                            "'pipeline'");
        read_key(p, "h", config.pipeline.h);
        read_key(p, "w", config.pipeline.w);
        read_key(p, "d", config.pipeline.d);
        read_key(p, "d_txt", config.pipeline.d_txt);
        read_key(p, "T", config.pipeline.steps);
        read_key(p, "seed", config.pipeline.seed);
        read_key(p, "lambda", config.pipeline.lambda);
        read_key(p, "mask_warmup_steps", config.pipeline.mask_warmup_steps);
        read_key(p, "extended_enabled", config.pipeline.extended_enabled);
        read_key(p, "iso_self", config.pipeline.iso_self_enabled);
        read_key(p, "iso_cross", config.pipeline.iso_cross_enabled);
        read_key(p, "reweight", config.pipeline.reweight_enabled);
        if (p.contains("stack")) {
            if (!p.at("stack").is_array()) {
                throw ConfigError("config: 'stack' must be an array of blocks");
            }
            config.pipeline.stack.clear();
            for (const auto& block : p.at("stack")) {
                if (!block.is_object()) {
                    throw ConfigError("config: each stack block must be an object");
                }
                reject_unknown_keys(block, {"extended"}, "a stack block");
                StackBlockSpec spec;
                read_key(block, "extended", spec.extended);
                config.pipeline.stack.push_back(spec);
            }
        }
    }
    if (j.contains("planner")) {
        const json& p = j.at("planner");
        reject_unknown_keys(p, {"mode", "endpoint", "template"}, "'planner'");
        read_key(p, "mode", config.planner.mode);
        read_key(p, "endpoint", config.planner.endpoint);
        read_key(p, "template", config.planner.template_path);
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        reject_unknown_keys(o, {"directory", "dump_maps", "dump_attention"}, "'output'");
        read_key(o, "directory", config.output.directory);
        read_key(o, "dump_maps", config.output.dump_maps);
        read_key(o, "dump_attention", config.output.dump_attention);
    }

    validate_run_config(config);
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("config: cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << f.rdbuf();
    return run_config_from_json_text(buffer.str());
}

std::string run_config_to_json_text(const RunConfig& config) {
    json stack = json::array();
    for (const auto& block : config.pipeline.stack) {
        stack.push_back({{"extended", block.extended}});
    }
    json j = {
        {"pipeline",
         {{"h", config.pipeline.h},
          {"w", config.pipeline.w},
          {"d", config.pipeline.d},
          {"d_txt", config.pipeline.d_txt},
          {"T", config.pipeline.steps},
          {"seed", config.pipeline.seed},
          {"stack", std::move(stack)},
          {"lambda", config.pipeline.lambda},
          {"mask_warmup_steps", config.pipeline.mask_warmup_steps},
          {"extended_enabled", config.pipeline.extended_enabled},
          {"iso_self", config.pipeline.iso_self_enabled},
          {"iso_cross", config.pipeline.iso_cross_enabled},
          {"reweight", config.pipeline.reweight_enabled}}},
        {"planner",
         {{"mode", config.planner.mode},
          {"endpoint", config.planner.endpoint},
          {"template", config.planner.template_path}}},
        {"output",
         {{"directory", config.output.directory},
          {"dump_maps", config.output.dump_maps},
          {"dump_attention", config.output.dump_attention}}},
    };
    return j.dump(2) + "\n";
}

void validate_run_config(const RunConfig& config) {
    try {
        validate_pipeline_config(config.pipeline);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (config.planner.mode != "script" && config.planner.mode != "llm") {
        throw ConfigError("config: planner mode must be 'script' or 'llm'");
    }
    if (config.output.directory.empty()) {
        throw ConfigError("config: output directory must not be empty");
    }
}

}  // namespace isoattn

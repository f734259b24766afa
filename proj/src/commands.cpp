// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>

#include "json.hpp"

#include "isoattn/llm_planner.hpp"
#include "isoattn/metrics.hpp"
#include "isoattn/pgm.hpp"
#include "isoattn/pipeline.hpp"
#include "isoattn/plan.hpp"
#include "isoattn/run_config.hpp"
#include "isoattn/script_parser.hpp"

namespace isoattn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << f.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    f << content;
}

std::string scene_tag(int scene) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "scene_%02d", scene);
    return buf;
}

std::string char_tag(int character) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "char_%02d", character);
    return buf;
}

std::string getenv_or_empty(const char* name) {
    const char* value = std::getenv(name);
    return value != nullptr ? value : "";
}

RunConfig resolve_config(const std::string& config_path) {
    if (config_path.empty()) {
        RunConfig config;
        validate_run_config(config);
        return config;
    }
    return load_run_config(config_path);
}

StoryPlan load_plan_file(const std::string& path) {
    return parse_plan_text(read_file(path));
}

/// Writes every attention matrix of the extended blocks as a PGM next to the
/// other run artifacts.
class PgmAttentionDumper final : public AttentionObserver {
public:
    explicit PgmAttentionDumper(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }

    void on_iso_self(const IsoSelfAttnEvent& event) override {
        const std::string base = prefix(event.scene, event.step, event.block_key);
        dump(base + "_iso_self_pre.pgm", *event.weights_pre_reweight);
        dump(base + "_iso_self_post.pgm", *event.weights);
    }

    void on_cross(const CrossAttnEvent& event) override {
        const std::string base = prefix(event.scene, event.step, event.block_key);
        if (event.character_id < 0) {
            dump(base + "_cross_scene.pgm", *event.weights);
        } else {
            dump(base + "_cross_" + char_tag(event.character_id) + ".pgm", *event.weights);
        }
    }

private:
    static std::string prefix(int scene, int step, int block) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "scene_%02d_step_%02d_block_%d", scene, step, block);
        return buf;
    }

    void dump(const std::string& name, const Matrix& weights) {
        write_pgm(dir_ / name, weights.rows, weights.cols,
                  std::span<const float>(weights.data.data(), weights.data.size()));
    }

    fs::path dir_;
};

json manifest_json(const StoryPlan& plan, const RunConfig& config,
                   std::span<const SceneResult> results, const ReferenceBank& bank) {
    json scenes = json::array();
    for (const auto& result : results) {
        const SceneSpec& scene = plan.scenes.at(result.scene_index);
        json characters = json::array();
        for (const auto& [id, mask] : result.masks) {
            const CharacterSpec* spec = plan.find_character(id);
            characters.push_back({{"id", id},
                                  {"name", spec != nullptr ? spec->name : ""},
                                  {"cv", mask.cv},
                                  {"degenerate", mask.degenerate},
                                  {"mask_area", mask.popcount()}});
        }
        scenes.push_back({{"index", result.scene_index},
                          {"prompt", scene.prompt},
                          {"present", scene.present},
                          {"new", scene.new_ids},
                          {"old", scene.old_ids},
                          {"characters", std::move(characters)},
                          {"references_stored", result.references_stored},
                          {"diagnostics", result.diagnostics}});
    }
    json bank_summary = json::array();
    for (const ReferenceEntry* entry : bank.all()) {
        bank_summary.push_back({{"character", entry->character_id},
                                {"block", entry->block_key},
                                {"count", entry->count()},
                                {"source_scene", entry->source_scene}});
    }
    const bool baseline = config.pipeline.lambda == 0.0f || !config.pipeline.extended_enabled ||
                          (!config.pipeline.iso_self_enabled &&
                           !config.pipeline.iso_cross_enabled);
    return {{"config", json::parse(run_config_to_json_text(config))},
            {"baseline_equivalent", baseline},
            {"scenes", std::move(scenes)},
            {"bank", std::move(bank_summary)}};
}

}  // namespace

int cmd_plan(const PlanOptions& options, std::ostream& out, std::ostream& err) {
    try {
        RunConfig config = resolve_config(options.config_path);
        StoryPlan plan;
        if (!options.llm_storyline.empty()) {
            HttpLlmConfig llm;
            llm.endpoint = !config.planner.endpoint.empty()
                               ? config.planner.endpoint
                               : getenv_or_empty("ISOATTN_LLM_ENDPOINT");
            llm.auth_token = getenv_or_empty("ISOATTN_LLM_TOKEN");
            if (llm.endpoint.empty()) {
                err << "error: no LLM endpoint configured (set planner.endpoint or "
                       "ISOATTN_LLM_ENDPOINT)\n";
                return kExitUsageError;
            }
            std::string prompt_template;
            if (!config.planner.template_path.empty()) {
                prompt_template = read_file(config.planner.template_path);
            }
            HttpLlmClient client(llm);
            plan = plan_with_llm(options.llm_storyline, client, prompt_template);
        } else {
            if (options.script_path.empty()) {
                err << "error: provide a script path or --llm <storyline>\n";
                return kExitUsageError;
            }
            plan = parse_script(read_file(options.script_path));
        }
        const auto diags = validate_plan(plan);
        for (const auto& d : diags) {
            err << "diagnostic: " << d << "\n";
        }
        write_file(options.out_path, serialize_plan(plan));
        out << "plan written to " << options.out_path << " (" << plan.characters.size()
            << " characters, " << plan.scenes.size() << " scenes)\n";
        return diags.empty() ? kExitOk : kExitDomainError;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
}

int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = resolve_config(options.config_path);
        if (options.seed.has_value()) {
            config.pipeline.seed = *options.seed;
        }
        if (options.lambda.has_value()) {
            config.pipeline.lambda = *options.lambda;
        }
        if (options.dump_attention.has_value()) {
            config.output.dump_attention = *options.dump_attention;
        }
        if (!options.out_dir.empty()) {
            config.output.directory = options.out_dir;
        }
        validate_run_config(config);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsageError;
    }

    try {
        const StoryPlan plan = load_plan_file(options.plan_path);
        const fs::path run_dir(config.output.directory);
        fs::create_directories(run_dir);

        std::unique_ptr<PgmAttentionDumper> dumper;
        if (config.output.dump_attention) {
            dumper = std::make_unique<PgmAttentionDumper>(run_dir / "attn");
        }

        ReferenceBank bank;
        const auto results = run_story(plan, config.pipeline, &bank, dumper.get());

        for (const auto& result : results) {
            const std::string tag = scene_tag(result.scene_index);
            save_matrix(run_dir / (tag + "_latent.bin"), result.final_latent);
            if (config.output.dump_maps) {
                for (const auto& [id, mask] : result.masks) {
                    write_pgm_bits(run_dir / (tag + "_" + char_tag(id) + "_mask.pgm"), mask.h,
                                   mask.w, mask.bits);
                }
                for (const auto& [id, map] : result.accumulated_maps) {
                    write_pgm(run_dir / (tag + "_" + char_tag(id) + "_map.pgm"),
                              config.pipeline.h, config.pipeline.w, map);
                }
            }
        }

        const ConsistencyReport report = consistency_report(results, plan);
        write_file(run_dir / "report.json", report_to_json_text(report));
        std::string table = format_report_table(report);
        const json manifest = manifest_json(plan, config, results, bank);
        if (manifest.at("baseline_equivalent").get<bool>()) {
            table = "mode: baseline\n" + table;
        }
        write_file(run_dir / "report.txt", table);
        write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");

        out << "run written to " << run_dir.string() << " (" << results.size()
            << " scenes, overall mean similarity " << report.overall_mean << ")\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
}

int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig config;
    PipelineConfig base;
    try {
        config = resolve_config(options.config_path);
        if (options.seed.has_value()) {
            config.pipeline.seed = *options.seed;
        }
        if (!options.out_dir.empty()) {
            config.output.directory = options.out_dir;
        }
        validate_run_config(config);
        // The grid drives the isolation switches; the base config must allow
        // them all.
        base = config.pipeline;
        base.extended_enabled = true;
        base.iso_self_enabled = true;
        base.iso_cross_enabled = true;
        base.reweight_enabled = true;
        try {
            validate_pipeline_config(base);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsageError;
    }

    try {
        const StoryPlan plan = load_plan_file(options.plan_path);
        const auto rows = ablation_run(plan, base, default_ablation_grid());
        const fs::path run_dir(config.output.directory);
        fs::create_directories(run_dir);
        const std::string table = format_ablation_table(rows);
        write_file(run_dir / "ablation.txt", table);
        write_file(run_dir / "ablation.json", ablation_to_json_text(rows));
        out << table;
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
}

int cmd_inspect(const InspectOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const fs::path run_dir(options.run_dir);
        const fs::path manifest_path = run_dir / "manifest.json";
        if (!fs::exists(manifest_path)) {
            err << "error: missing artifact " << manifest_path.string() << "\n";
            return kExitDomainError;
        }
        const json manifest = json::parse(read_file(manifest_path));

        const json* scene = nullptr;
        for (const auto& s : manifest.at("scenes")) {
            if (s.at("index").get<int>() == options.scene) {
                scene = &s;
                break;
            }
        }
        if (scene == nullptr) {
            err << "error: scene " << options.scene << " not found in the run\n";
            return kExitDomainError;
        }
        const json* character = nullptr;
        for (const auto& c : scene->at("characters")) {
            if (c.at("id").get<int>() == options.character) {
                character = &c;
                break;
            }
        }
        if (character == nullptr) {
            err << "error: character " << options.character << " is not present in scene "
                << options.scene << "\n";
            return kExitDomainError;
        }

        out << "scene " << options.scene << ", character " << options.character << " ('"
            << character->at("name").get<std::string>() << "')\n";
        out << "  cv: " << character->at("cv").get<double>() << "\n";
        out << "  mask area: " << character->at("mask_area").get<int>() << "\n";
        int reference_count = -1;
        for (const auto& entry : manifest.at("bank")) {
            if (entry.at("character").get<int>() == options.character) {
                reference_count = entry.at("count").get<int>();
                break;
            }
        }
        out << "  n_m: " << (reference_count >= 0 ? std::to_string(reference_count) : "-")
            << "\n";

        if (character->at("degenerate").get<bool>()) {
            out << "  degenerate: yes (no mask overlay)\n";
            return kExitOk;
        }
        out << "  degenerate: no\n";

        const std::string tag = scene_tag(options.scene) + "_" + char_tag(options.character);
        const fs::path mask_path = run_dir / (tag + "_mask.pgm");
        const fs::path map_path = run_dir / (tag + "_map.pgm");
        for (const auto& path : {mask_path, map_path}) {
            if (!fs::exists(path)) {
                err << "error: missing artifact " << path.string() << "\n";
                return kExitDomainError;
            }
        }
        const PgmImage mask = read_pgm(mask_path);
        const PgmImage map = read_pgm(map_path);
        PgmImage overlay = map;
        for (size_t i = 0; i < overlay.bytes.size(); ++i) {
            if (mask.bytes[i] == 0) {
                overlay.bytes[i] = 0;
            }
        }
        const fs::path overlay_path = run_dir / ("inspect_" + tag + "_overlay.pgm");
        std::ofstream f(overlay_path, std::ios::binary);
        f << "P5\n" << overlay.w << " " << overlay.h << "\n255\n";
        f.write(reinterpret_cast<const char*>(overlay.bytes.data()),
                static_cast<std::streamsize>(overlay.bytes.size()));
        out << "  overlay written to " << overlay_path.string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
}

}  // namespace isoattn

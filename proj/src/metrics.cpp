// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace isoattn {

using nlohmann::json;

namespace {

std::vector<double> pooled_masked_feature(const SceneResult& result, int character_id) {
    auto it = result.masks.find(character_id);
    if (it == result.masks.end()) {
        throw std::invalid_argument("masked_feature_similarity: character " +
                                    std::to_string(character_id) + " absent from scene " +
                                    std::to_string(result.scene_index));
    }
    const CharacterMask& mask = it->second;
    if (mask.degenerate || mask.popcount() == 0) {
        throw std::invalid_argument("masked_feature_similarity: degenerate mask for character " +
                                    std::to_string(character_id) + " in scene " +
                                    std::to_string(result.scene_index));
    }
    const Matrix& latent = result.final_latent;
    if (static_cast<size_t>(latent.rows) != mask.bits.size()) {
        throw std::invalid_argument("masked_feature_similarity: mask/latent shape mismatch");
    }
    std::vector<double> pooled(static_cast<size_t>(latent.cols), 0.0);
    int count = 0;
    for (int r = 0; r < latent.rows; ++r) {
        if (!mask.bits[r]) {
            continue;
        }
        const auto row = latent.row(r);
        for (int c = 0; c < latent.cols; ++c) {
            pooled[c] += row[c];
        }
        ++count;
    }
    for (double& v : pooled) {
        v /= count;
    }
    return pooled;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

double masked_feature_similarity(const SceneResult& a, const SceneResult& b,
                                 int character_id) {
    const auto pa = pooled_masked_feature(a, character_id);
    const auto pb = pooled_masked_feature(b, character_id);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < pa.size(); ++i) {
        dot += pa[i] * pb[i];
        na += pa[i] * pa[i];
        nb += pb[i] * pb[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::domain_error("masked_feature_similarity: zero-norm pooled vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

ConsistencyReport consistency_report(std::span<const SceneResult> results,
                                     const StoryPlan& plan) {
    ConsistencyReport report;
    double overall = 0.0;
    for (const auto& character : plan.characters) {
        CharacterConsistency entry;
        entry.character_id = character.id;

        int first_scene = -1;
        std::vector<int> later_scenes;
        for (const auto& scene : plan.scenes) {
            const bool present =
                std::find(scene.present.begin(), scene.present.end(), character.id) !=
                scene.present.end();
            if (!present) {
                continue;
            }
            if (first_scene < 0) {
                first_scene = scene.index;
            } else {
                later_scenes.push_back(scene.index);
            }
        }

        auto valid_mask = [&](int scene_index) {
            if (scene_index >= static_cast<int>(results.size())) {
                return false;
            }
            auto it = results[scene_index].masks.find(character.id);
            return it != results[scene_index].masks.end() && !it->second.degenerate &&
                   it->second.popcount() > 0;
        };

        if (first_scene < 0 || later_scenes.empty()) {
            entry.note = "appears in fewer than two scenes; skipped";
        } else if (!valid_mask(first_scene)) {
            entry.note = "degenerate mask in the reference scene; skipped";
        } else {
            double sum = 0.0;
            for (int scene_index : later_scenes) {
                if (!valid_mask(scene_index)) {
                    continue;
                }
                ScenePairSimilarity pair;
                pair.reference_scene = first_scene;
                pair.scene = scene_index;
                pair.similarity = masked_feature_similarity(results[first_scene],
                                                            results[scene_index], character.id);
                sum += pair.similarity;
                entry.pairs.push_back(pair);
            }
            if (entry.pairs.empty()) {
                entry.note = "no later scene with a usable mask; skipped";
            } else {
                entry.mean_similarity = sum / static_cast<double>(entry.pairs.size());
            }
        }

        if (!entry.pairs.empty()) {
            overall += entry.mean_similarity;
            ++report.characters_measured;
        }
        report.characters.push_back(std::move(entry));
    }
    if (report.characters_measured > 0) {
        report.overall_mean = overall / report.characters_measured;
    }
    return report;
}

std::string report_to_json_text(const ConsistencyReport& report) {
    json j;
    j["overall_mean"] = report.overall_mean;
    j["characters_measured"] = report.characters_measured;
    j["characters"] = json::array();
    for (const auto& c : report.characters) {
        json pairs = json::array();
        for (const auto& p : c.pairs) {
            pairs.push_back({{"reference_scene", p.reference_scene},
                             {"scene", p.scene},
                             {"similarity", p.similarity}});
        }
        j["characters"].push_back({{"id", c.character_id},
                                   {"mean_similarity", c.mean_similarity},
                                   {"note", c.note},
                                   {"pairs", std::move(pairs)}});
    }
    return j.dump(2) + "\n";
}

std::string format_report_table(const ConsistencyReport& report) {
    std::string out;
    out += "character  pairs  mean_similarity  note\n";
    for (const auto& c : report.characters) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-9d  %-5zu  %-15s  %s\n", c.character_id,
                      c.pairs.size(), format_double(c.mean_similarity).c_str(),
                      c.note.c_str());
        out += line;
    }
    out += "overall mean: " + format_double(report.overall_mean) + " over " +
           std::to_string(report.characters_measured) + " character(s)\n";
    return out;
}

std::vector<AblationConfig> default_ablation_grid() {
    return {
        {"baseline", false, false, false},
        {"ic", true, false, false},
        {"is", false, true, false},
        {"is+re", false, true, true},
        {"full", true, true, true},
    };
}

std::vector<AblationRow> ablation_run(const StoryPlan& plan, const PipelineConfig& base,
                                      std::span<const AblationConfig> grid) {
    std::vector<AblationRow> rows;
    rows.reserve(grid.size());
    for (const auto& entry : grid) {
        if (entry.reweight && !entry.iso_self) {
            throw std::invalid_argument("ablation_run: '" + entry.label +
                                        "' enables re-weighting without isolated "
                                        "self-attention");
        }
        PipelineConfig config = base;
        config.iso_cross_enabled = entry.iso_cross;
        config.iso_self_enabled = entry.iso_self;
        config.reweight_enabled = entry.reweight;
        const auto results = run_story(plan, config);
        rows.push_back({entry, consistency_report(results, plan)});
    }
    return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
    std::string out;
    out += "label     ic  is  re  overall_mean  characters\n";
    for (const auto& row : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-8s  %-2s  %-2s  %-2s  %-12s  %d\n",
                      row.switches.label.c_str(), row.switches.iso_cross ? "x" : "-",
                      row.switches.iso_self ? "x" : "-", row.switches.reweight ? "x" : "-",
                      format_double(row.report.overall_mean).c_str(),
                      row.report.characters_measured);
        out += line;
    }
    return out;
}

std::string ablation_to_json_text(std::span<const AblationRow> rows) {
    json j = json::array();
    for (const auto& row : rows) {
        j.push_back({{"label", row.switches.label},
                     {"iso_cross", row.switches.iso_cross},
                     {"iso_self", row.switches.iso_self},
                     {"reweight", row.switches.reweight},
                     {"overall_mean", row.report.overall_mean},
                     {"characters_measured", row.report.characters_measured}});
    }
    return j.dump(2) + "\n";
}

}  // namespace isoattn

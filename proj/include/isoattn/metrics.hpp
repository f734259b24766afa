// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "isoattn/pipeline.hpp"
#include "isoattn/plan.hpp"

namespace isoattn {

/// Cosine similarity of the character's mean-pooled latent rows under each
/// scene's own mask. Throws when the character is absent, its mask is
/// degenerate in either scene, or a pooled vector has zero norm.
double masked_feature_similarity(const SceneResult& a, const SceneResult& b, int character_id);

struct ScenePairSimilarity {
    int reference_scene = 0;
    int scene = 0;
    double similarity = 0.0;
};

struct CharacterConsistency {
    int character_id = -1;
    std::vector<ScenePairSimilarity> pairs;
    double mean_similarity = 0.0;
    std::string note;  // set when the character was skipped
};

struct ConsistencyReport {
    std::vector<CharacterConsistency> characters;
    double overall_mean = 0.0;  // mean over characters with at least one pair
    int characters_measured = 0;
};

/// First-occurrence protocol: each character's debut scene is the reference;
/// similarities are computed against every later scene where it appears with
/// a non-degenerate mask.
ConsistencyReport consistency_report(std::span<const SceneResult> results,
                                     const StoryPlan& plan);

std::string report_to_json_text(const ConsistencyReport& report);
std::string format_report_table(const ConsistencyReport& report);

struct AblationConfig {
    std::string label;
    bool iso_cross = false;
    bool iso_self = false;
    bool reweight = false;
};

/// The five valid switch combinations, all-off first.
std::vector<AblationConfig> default_ablation_grid();

struct AblationRow {
    AblationConfig switches;
    ConsistencyReport report;
};

/// Re-runs the full story once per grid row with shared seeds. Throws on an
/// invalid combination (re-weighting without isolated self-attention).
std::vector<AblationRow> ablation_run(const StoryPlan& plan, const PipelineConfig& base,
                                      std::span<const AblationConfig> grid);

std::string format_ablation_table(std::span<const AblationRow> rows);
std::string ablation_to_json_text(std::span<const AblationRow> rows);

}  // namespace isoattn

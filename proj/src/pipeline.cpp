// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "isoattn/iso_self_attention.hpp"
#include "isoattn/rng.hpp"

namespace isoattn {

namespace {

constexpr int kFeedForwardMult = 4;
constexpr uint64_t kLatentStream = 0x6c61746e;  // "latn"
constexpr uint64_t kTokenStream = 0x746f6b6e;   // "tokn"

std::vector<int> usable_old_characters(const SceneSpec& scene, ReferenceBank& bank,
                                       const PipelineConfig& config,
                                       const std::vector<int>& extended_blocks,
                                       std::vector<std::string>& diagnostics) {
    std::vector<int> usable;
    for (int id : scene.old_ids) {
        if (!config.iso_self_enabled) {
            usable.push_back(id);
            continue;
        }
        bool stored = true;
        for (int b : extended_blocks) {
            if (bank.has(id, b)) {
                continue;
            }
            if (bank.degenerate_skipped(id, b)) {
                stored = false;
                break;
            }
            throw std::runtime_error("denoise_scene: scene " + std::to_string(scene.index) +
                                     " marks character " + std::to_string(id) +
                                     " as old but block " + std::to_string(b) +
                                     " has no stored reference");
        }
        if (stored) {
            usable.push_back(id);
        } else {
            diagnostics.push_back("character " + std::to_string(id) +
                                  " has no reference (degenerate at debut); isolation skipped");
        }
    }
    return usable;
}

}  // namespace

ExtendedBlockConfig PipelineConfig::block_config() const {
    ExtendedBlockConfig c;
    c.lambda = lambda;
    c.extended_enabled = extended_enabled;
    c.iso_self_enabled = iso_self_enabled;
    c.iso_cross_enabled = iso_cross_enabled;
    c.reweight_enabled = reweight_enabled;
    return c;
}

void validate_pipeline_config(const PipelineConfig& config) {
    if (config.h <= 0 || config.w <= 0 || config.d <= 0 || config.d_txt <= 0) {
        throw std::invalid_argument("pipeline config: dimensions must be positive");
    }
    if (config.steps < 1) {
        throw std::invalid_argument("pipeline config: steps must be >= 1");
    }
    if (config.mask_warmup_steps < 1) {
        throw std::invalid_argument("pipeline config: mask_warmup_steps must be >= 1");
    }
    if (config.stack.empty()) {
        throw std::invalid_argument("pipeline config: stack must contain at least one block");
    }
    if (!std::isfinite(config.lambda)) {
        throw std::invalid_argument("pipeline config: lambda must be finite");
    }
    if (config.reweight_enabled && !config.iso_self_enabled) {
        throw std::invalid_argument(
            "pipeline config: reweight requires isolated self-attention");
    }
    const bool isolation = config.extended_enabled &&
                           (config.iso_self_enabled || config.iso_cross_enabled);
    if (isolation) {
        const bool any_extended =
            std::any_of(config.stack.begin(), config.stack.end(),
                        [](const StackBlockSpec& b) { return b.extended; });
        if (!any_extended) {
            throw std::invalid_argument(
                "pipeline config: isolation is enabled but no stack block is extended");
        }
    }
}

Matrix encode_prompt(const std::string& text, int d_txt, uint64_t seed) {
    const auto tokens = whitespace_tokens(text);
    if (tokens.empty()) {
        throw std::invalid_argument("encode_prompt: empty prompt");
    }
    Matrix embedding(static_cast<int>(tokens.size()), d_txt);
    for (size_t t = 0; t < tokens.size(); ++t) {
        Rng rng(derive_seed(seed, fnv1a64(tokens[t]), kTokenStream));
        auto row = embedding.row(static_cast<int>(t));
        double norm_sq = 0.0;
        for (int c = 0; c < d_txt; ++c) {
            row[c] = rng.next_normal();
            norm_sq += static_cast<double>(row[c]) * row[c];
        }
        if (norm_sq == 0.0) {
            row[0] = 1.0f;
            norm_sq = 1.0;
        }
        const float inv_norm = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (int c = 0; c < d_txt; ++c) {
            row[c] *= inv_norm;
        }
    }
    return embedding;
}

Matrix init_latent(const PipelineConfig& config, int scene_index) {
    Rng rng(derive_seed(config.seed, static_cast<uint64_t>(scene_index), kLatentStream));
    Matrix latent(config.latent_tokens(), config.d);
    for (float& v : latent.data) {
        v = rng.next_normal();
    }
    return latent;
}

SceneResult denoise_scene(const StoryPlan& plan, int scene_index, ReferenceBank& bank,
                          const PipelineConfig& config, AttentionObserver* observer) {
    validate_pipeline_config(config);
    if (scene_index < 0 || scene_index >= static_cast<int>(plan.scenes.size())) {
        throw std::invalid_argument("denoise_scene: scene index out of range");
    }
    const SceneSpec& scene = plan.scenes[scene_index];
    const int tokens = config.latent_tokens();

    SceneResult result;
    result.scene_index = scene_index;

    const Matrix scene_embedding = encode_prompt(scene.prompt, config.d_txt, config.seed);
    std::map<int, Matrix> character_embeddings;
    for (int id : scene.old_ids) {
        const CharacterSpec* character = plan.find_character(id);
        if (character == nullptr) {
            throw std::invalid_argument("denoise_scene: plan references unknown character " +
                                        std::to_string(id));
        }
        character_embeddings.emplace(
            id, encode_prompt(character->prompt, config.d_txt, config.seed));
    }

    const int n_blocks = static_cast<int>(config.stack.size());
    std::vector<BlockParams> params;
    params.reserve(config.stack.size());
    for (int b = 0; b < n_blocks; ++b) {
        params.push_back(make_block_params(config.seed, b, config.d, config.d_txt,
                                           config.d * kFeedForwardMult));
    }

    std::vector<int> extended_blocks;
    for (int b = 0; b < n_blocks; ++b) {
        if (config.stack[b].extended) {
            extended_blocks.push_back(b);
        }
    }
    std::map<int, AttnMapAccumulator> accumulators;
    for (int id : scene.present) {
        accumulators.emplace(id, AttnMapAccumulator(id, config.h, config.w));
    }

    const bool mechanisms_on = config.extended_enabled &&
                               (config.iso_self_enabled || config.iso_cross_enabled);
    std::vector<int> usable_old;
    bool old_checked = false;
    bool degenerate_noted = false;

    std::map<int, CharacterMask> masks;
    bool masks_ready = false;

    std::map<int, Matrix> final_block_inputs;  // block key -> input at the last step
    Matrix latent = init_latent(config, scene_index);
    const float step_gain = 1.0f / static_cast<float>(config.steps);

    for (int step = 1; step <= config.steps; ++step) {
        const bool isolation_possible = mechanisms_on && masks_ready &&
                                        step > config.mask_warmup_steps &&
                                        !scene.old_ids.empty();
        if (isolation_possible && !old_checked) {
            usable_old =
                usable_old_characters(scene, bank, config, extended_blocks, result.diagnostics);
            old_checked = true;
        }

        // Isolation context shared by every extended block this step.
        std::vector<int> iso_ids;
        std::vector<const CharacterMask*> iso_masks;
        std::map<int, ReweightVector> reweights;
        std::vector<const ReweightVector*> iso_reweights;
        std::vector<const Matrix*> iso_embeddings;
        if (isolation_possible) {
            bool all_degenerate = true;
            for (int id : usable_old) {
                if (!masks.at(id).degenerate) {
                    all_degenerate = false;
                    break;
                }
            }
            if (all_degenerate && !usable_old.empty()) {
                if (!degenerate_noted) {
                    result.diagnostics.push_back(
                        "all old characters degenerate; proceeding without isolation");
                    degenerate_noted = true;
                }
            } else {
                for (int id : usable_old) {
                    iso_ids.push_back(id);
                    const CharacterMask& mask = masks.at(id);
                    iso_masks.push_back(&mask);
                    if (config.reweight_enabled && !mask.degenerate) {
                        reweights.emplace(id, normalize_cross_map(
                                                  id, accumulators.at(id).running_mean));
                    }
                    iso_embeddings.push_back(&character_embeddings.at(id));
                }
                for (int id : iso_ids) {
                    auto it = reweights.find(id);
                    iso_reweights.push_back(it == reweights.end() ? nullptr : &it->second);
                }
            }
        }

        Matrix x = latent;
        std::vector<std::map<int, std::vector<float>>> step_maps(
            static_cast<size_t>(n_blocks));
        for (int b = 0; b < n_blocks; ++b) {
            const bool is_extended_block = config.stack[b].extended;
            if (step == config.steps && is_extended_block) {
                final_block_inputs.insert_or_assign(b, x);
            }

            OriginalBranch original =
                run_original_branch(x, scene_embedding, params[b], scene.name_spans);
            step_maps[b] = std::move(original.character_maps);
            if (observer != nullptr && is_extended_block) {
                CrossAttnEvent event;
                event.scene = scene_index;
                event.step = step;
                event.block_key = b;
                event.character_id = -1;
                event.extended_branch = false;
                event.weights = &original.cross_weights;
                observer->on_cross(event);
            }

            const bool run_extended =
                is_extended_block && config.extended_enabled && !iso_ids.empty();
            if (!run_extended) {
                x = std::move(original.output);
                continue;
            }

            IsolationInputs iso;
            iso.character_ids = iso_ids;
            iso.masks = iso_masks;
            iso.reweights = iso_reweights;
            iso.character_embeddings = iso_embeddings;
            if (config.iso_self_enabled) {
                auto [entries, layout] = bank.fetch(iso_ids, b, tokens);
                iso.layout = std::move(layout);
                iso.reference_tokens.reserve(entries.size());
                for (const ReferenceEntry* entry : entries) {
                    iso.reference_tokens.push_back(&entry->tokens);
                }
            }

            ExtendedBranch extended = run_extended_branch(x, scene_embedding, iso,
                                                          params[b], config.block_config());
            if (extended.reweight_rows_skipped > 0) {
                result.diagnostics.push_back(
                    "step " + std::to_string(step) + " block " + std::to_string(b) + ": " +
                    std::to_string(extended.reweight_rows_skipped) +
                    " re-weighted rows had zero mass and were left unchanged");
            }
            if (observer != nullptr) {
                if (!extended.iso_self_weights.data.empty()) {
                    IsoSelfAttnEvent event;
                    event.scene = scene_index;
                    event.step = step;
                    event.block_key = b;
                    event.weights_pre_reweight = &extended.iso_self_weights_pre;
                    event.weights = &extended.iso_self_weights;
                    event.layout = &iso.layout;
                    event.masks = iso.masks;
                    observer->on_iso_self(event);
                }
                for (const auto& [id, weights] : extended.character_cross_weights) {
                    CrossAttnEvent cross_event;
                    cross_event.scene = scene_index;
                    cross_event.step = step;
                    cross_event.block_key = b;
                    cross_event.character_id = id;
                    cross_event.extended_branch = true;
                    cross_event.weights = &weights;
                    observer->on_cross(cross_event);
                }
            }
            x = merge_branches(original.output, extended.output, config.lambda);
        }

        // Accumulate this step's per-character maps, averaged over every
        // block's original branch; averaging across the stack smooths
        // single-block noise.
        for (int id : scene.present) {
            std::vector<float> mean(static_cast<size_t>(tokens), 0.0f);
            for (int b = 0; b < n_blocks; ++b) {
                const auto& map = step_maps[b].at(id);
                for (size_t i = 0; i < mean.size(); ++i) {
                    mean[i] += map[i];
                }
            }
            const float inv = 1.0f / static_cast<float>(n_blocks);
            for (float& v : mean) {
                v *= inv;
            }
            accumulators.at(id).accumulate(mean);
        }

        // Scheduler stand-in: contract the latent toward the stack output.
        for (size_t i = 0; i < latent.data.size(); ++i) {
            latent.data[i] = latent.data[i] - step_gain * (latent.data[i] - x.data[i]);
        }

        if (step >= config.mask_warmup_steps) {
            std::vector<CharacterMask> raw;
            raw.reserve(scene.present.size());
            for (int id : scene.present) {
                raw.push_back(
                    otsu_binarize(id, config.h, config.w, accumulators.at(id).running_mean));
            }
            masks.clear();
            for (auto& mask : resolve_overlaps(std::move(raw))) {
                masks.emplace(mask.character_id, std::move(mask));
            }
            masks_ready = true;
        }
    }

    // Store references for characters debuting in this scene.
    for (int id : scene.new_ids) {
        if (!masks_ready) {
            result.diagnostics.push_back("character " + std::to_string(id) +
                                         " debut ended before mask warmup; no reference stored");
            continue;
        }
        const CharacterMask& mask = masks.at(id);
        bool stored_any = false;
        for (int b : extended_blocks) {
            if (bank.store_new(id, b, final_block_inputs.at(b), mask, scene_index)) {
                stored_any = true;
            }
        }
        if (stored_any) {
            result.references_stored.push_back(id);
        } else if (!extended_blocks.empty()) {
            result.diagnostics.push_back("character " + std::to_string(id) +
                                         " has a degenerate mask; no reference stored");
        }
    }

    result.final_latent = std::move(latent);
    result.masks = std::move(masks);
    for (const auto& [id, acc] : accumulators) {
        result.accumulated_maps.emplace(id, acc.running_mean);
    }
    return result;
}

std::vector<SceneResult> run_story(const StoryPlan& plan, const PipelineConfig& config,
                                   ReferenceBank* bank, AttentionObserver* observer) {
    validate_pipeline_config(config);
    ReferenceBank local;
    ReferenceBank& store = bank != nullptr ? *bank : local;
    std::vector<SceneResult> results;
    results.reserve(plan.scenes.size());
    for (size_t i = 0; i < plan.scenes.size(); ++i) {
        results.push_back(
            denoise_scene(plan, static_cast<int>(i), store, config, observer));
    }
    return results;
}

}  // namespace isoattn

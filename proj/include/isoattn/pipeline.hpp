// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "isoattn/mask.hpp"
#include "isoattn/matrix.hpp"
#include "isoattn/plan.hpp"
#include "isoattn/reference_bank.hpp"
#include "isoattn/transformer_block.hpp"

namespace isoattn {

struct StackBlockSpec {
    bool extended = false;
};

/// Deterministic desk-scale generation settings. The stack models the
/// up-sampling half of a denoiser: a short run of blocks where the trailing
/// ones are extended with the isolation branch.
struct PipelineConfig {
    int h = 16;
    int w = 16;
    int d = 32;
    int d_txt = 32;
    int steps = 10;
    uint64_t seed = 0;
    std::vector<StackBlockSpec> stack = {{false}, {false}, {true}, {true}};
    float lambda = 1.1f;
    int mask_warmup_steps = 2;
    bool extended_enabled = true;
    bool iso_self_enabled = true;
    bool iso_cross_enabled = true;
    bool reweight_enabled = true;

    int latent_tokens() const { return h * w; }
    ExtendedBlockConfig block_config() const;
};

/// Throws std::invalid_argument when the configuration is inconsistent.
void validate_pipeline_config(const PipelineConfig& config);

struct SceneResult {
    int scene_index = 0;
    Matrix final_latent;  // (h*w) x d
    std::map<int, CharacterMask> masks;               // final masks per present character
    std::map<int, std::vector<float>> accumulated_maps;  // final running means
    std::vector<int> references_stored;
    std::vector<std::string> diagnostics;
};

struct IsoSelfAttnEvent {
    int scene = 0;
    int step = 0;
    int block_key = 0;
    const Matrix* weights_pre_reweight = nullptr;
    const Matrix* weights = nullptr;
    const ConcatLayout* layout = nullptr;
    std::span<const CharacterMask* const> masks;
};

struct CrossAttnEvent {
    int scene = 0;
    int step = 0;
    int block_key = 0;
    int character_id = -1;  // -1 for the scene prompt
    bool extended_branch = false;
    const Matrix* weights = nullptr;
};

/// Synchronous hook into the attention internals of extended blocks; pointers
/// are valid only for the duration of the call.
class AttentionObserver {
public:
    virtual ~AttentionObserver() = default;
    virtual void on_iso_self(const IsoSelfAttnEvent&) {}
    virtual void on_cross(const CrossAttnEvent&) {}
};

/// Whitespace tokenization; each token row is a unit-norm vector drawn from a
/// stream keyed by (seed, hash(token)), so identical tokens share a row.
Matrix encode_prompt(const std::string& text, int d_txt, uint64_t seed);

/// Seeded standard-normal latent; the stream is keyed by (seed, scene index).
Matrix init_latent(const PipelineConfig& config, int scene_index);

SceneResult denoise_scene(const StoryPlan& plan, int scene_index, ReferenceBank& bank,
                          const PipelineConfig& config, AttentionObserver* observer = nullptr);

std::vector<SceneResult> run_story(const StoryPlan& plan, const PipelineConfig& config,
                                   ReferenceBank* bank = nullptr,
                                   AttentionObserver* observer = nullptr);

}  // namespace isoattn

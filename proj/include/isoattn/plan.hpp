// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace isoattn {

/// Half-open token range [start, start + len) inside a whitespace-tokenized
/// prompt.
struct TokenSpan {
    int start = 0;
    int len = 0;
};

struct CharacterSpec {
    int id = -1;
    std::string name;
    std::string prompt;  // appearance description
};

struct SceneSpec {
    int index = 0;
    std::string prompt;
    std::vector<int> present;  // ascending character ids
    std::vector<int> new_ids;  // first appearances, ascending
    std::vector<int> old_ids;  // reappearances, ascending
    std::map<int, TokenSpan> name_spans;
};

struct StoryPlan {
    std::vector<CharacterSpec> characters;
    std::vector<SceneSpec> scenes;

    const CharacterSpec* find_character(int id) const;
};

std::vector<std::string> whitespace_tokens(std::string_view text);

/// First position where `name_tokens` occurs as a consecutive run inside
/// `tokens`, or nullopt.
std::optional<TokenSpan> find_token_span(std::span<const std::string> tokens,
                                         std::span<const std::string> name_tokens);

/// Scene input before appearance bookkeeping. When `cast` is set it names the
/// characters in the scene explicitly; otherwise they are detected by exact
/// name occurrence in the prompt.
struct SceneDraft {
    std::string prompt;
    std::optional<std::vector<int>> cast;
};

/// Assigns dense character ids, detects per-scene casts and name spans, and
/// derives new/old sets from first-occurrence order. This is the single
/// authority for appearance bookkeeping; both the script parser and the LLM
/// planner funnel through it. Throws std::invalid_argument on inconsistent
/// input (duplicate names, cast member absent from its prompt, character that
/// never appears, empty scene list).
StoryPlan build_plan(std::vector<CharacterSpec> characters, std::vector<SceneDraft> scenes);

/// One human-readable line per invariant violation; empty means the plan is
/// well-formed.
std::vector<std::string> validate_plan(const StoryPlan& plan);

std::string serialize_plan(const StoryPlan& plan);
StoryPlan parse_plan_text(const std::string& text);

}  // namespace isoattn

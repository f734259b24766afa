// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/plan.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace isoattn {

using nlohmann::json;

const CharacterSpec* StoryPlan::find_character(int id) const {
    for (const auto& c : characters) {
        if (c.id == id) {
            return &c;
        }
    }
    return nullptr;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i > start) {
            tokens.emplace_back(text.substr(start, i - start));
        }
    }
    return tokens;
}

std::optional<TokenSpan> find_token_span(std::span<const std::string> tokens,
                                         std::span<const std::string> name_tokens) {
    if (name_tokens.empty() || tokens.size() < name_tokens.size()) {
        return std::nullopt;
    }
    for (size_t i = 0; i + name_tokens.size() <= tokens.size(); ++i) {
        bool match = true;
        for (size_t j = 0; j < name_tokens.size(); ++j) {
            if (tokens[i + j] != name_tokens[j]) {
                match = false;
                break;
            }
        }
        if (match) {
            return TokenSpan{static_cast<int>(i), static_cast<int>(name_tokens.size())};
        }
    }
    return std::nullopt;
}

StoryPlan build_plan(std::vector<CharacterSpec> characters, std::vector<SceneDraft> drafts) {
    if (drafts.empty()) {
        throw std::invalid_argument("plan: script declares no scenes");
    }
    std::set<std::string> names;
    for (size_t i = 0; i < characters.size(); ++i) {
        auto& c = characters[i];
        c.id = static_cast<int>(i);
        if (c.name.empty()) {
            throw std::invalid_argument("plan: character " + std::to_string(i) +
                                        " has an empty name");
        }
        if (c.prompt.empty()) {
            throw std::invalid_argument("plan: character '" + c.name +
                                        "' has an empty prompt");
        }
        if (!names.insert(c.name).second) {
            throw std::invalid_argument("plan: duplicate character name '" + c.name + "'");
        }
    }

    std::vector<std::vector<std::string>> name_tokens(characters.size());
    for (size_t i = 0; i < characters.size(); ++i) {
        name_tokens[i] = whitespace_tokens(characters[i].name);
    }

    StoryPlan plan;
    plan.characters = std::move(characters);

    std::set<int> seen;
    for (size_t s = 0; s < drafts.size(); ++s) {
        SceneSpec scene;
        scene.index = static_cast<int>(s);
        scene.prompt = std::move(drafts[s].prompt);
        if (scene.prompt.empty()) {
            throw std::invalid_argument("plan: scene " + std::to_string(s) +
                                        " has an empty prompt");
        }
        const auto tokens = whitespace_tokens(scene.prompt);

        std::vector<int> present;
        if (drafts[s].cast.has_value()) {
            present = *drafts[s].cast;
            std::sort(present.begin(), present.end());
            present.erase(std::unique(present.begin(), present.end()), present.end());
            for (int id : present) {
                if (id < 0 || id >= static_cast<int>(plan.characters.size())) {
                    throw std::invalid_argument("plan: scene " + std::to_string(s) +
                                                " casts unknown character id " +
                                                std::to_string(id));
                }
            }
        } else {
            for (const auto& c : plan.characters) {
                if (find_token_span(tokens, name_tokens[c.id]).has_value()) {
                    present.push_back(c.id);
                }
            }
        }

        for (int id : present) {
            auto span = find_token_span(tokens, name_tokens[id]);
            if (!span.has_value()) {
                throw std::invalid_argument("plan: character '" + plan.characters[id].name +
                                            "' is cast in scene " + std::to_string(s) +
                                            " but its name does not occur in the prompt");
            }
            scene.name_spans[id] = *span;
        }

        scene.present = present;
        for (int id : present) {
            if (seen.count(id)) {
                scene.old_ids.push_back(id);
            } else {
                scene.new_ids.push_back(id);
                seen.insert(id);
            }
        }
        plan.scenes.push_back(std::move(scene));
    }

    for (const auto& c : plan.characters) {
        if (!seen.count(c.id)) {
            throw std::invalid_argument("plan: character '" + c.name +
                                        "' never appears in any scene");
        }
    }
    return plan;
}

std::vector<std::string> validate_plan(const StoryPlan& plan) {
    std::vector<std::string> diags;
    auto emit = [&diags](std::string msg) { diags.push_back(std::move(msg)); };

    std::set<int> ids;
    std::set<std::string> names;
    for (const auto& c : plan.characters) {
        if (!ids.insert(c.id).second) {
            emit("duplicate character id " + std::to_string(c.id));
        }
        if (c.name.empty()) {
            emit("character " + std::to_string(c.id) + " has an empty name");
        } else if (!names.insert(c.name).second) {
            emit("duplicate character name '" + c.name + "'");
        }
        if (c.prompt.empty()) {
            emit("character '" + c.name + "' has an empty prompt");
        }
    }
    for (int i = 0; i < static_cast<int>(plan.characters.size()); ++i) {
        if (!ids.count(i)) {
            emit("character ids are not dense: missing id " + std::to_string(i));
            break;
        }
    }
    if (plan.scenes.empty()) {
        emit("plan has no scenes");
    }

    std::set<int> seen;
    std::map<int, int> new_count;
    for (size_t s = 0; s < plan.scenes.size(); ++s) {
        const auto& scene = plan.scenes[s];
        const std::string where = "scene " + std::to_string(s);
        if (scene.index != static_cast<int>(s)) {
            emit(where + ": index " + std::to_string(scene.index) + " out of order");
        }
        if (scene.prompt.empty()) {
            emit(where + ": empty prompt");
        }
        std::set<int> present(scene.present.begin(), scene.present.end());
        std::set<int> fresh(scene.new_ids.begin(), scene.new_ids.end());
        std::set<int> old(scene.old_ids.begin(), scene.old_ids.end());
        for (int id : present) {
            if (!ids.count(id)) {
                emit(where + ": references unknown character id " + std::to_string(id));
            }
        }
        std::set<int> uni;
        uni.insert(fresh.begin(), fresh.end());
        uni.insert(old.begin(), old.end());
        if (uni != present) {
            emit(where + ": new + old does not equal present");
        }
        for (int id : fresh) {
            if (old.count(id)) {
                emit(where + ": character " + std::to_string(id) + " is both new and old");
            }
            ++new_count[id];
        }
        for (int id : old) {
            if (!seen.count(id)) {
                emit(where + ": character " + std::to_string(id) +
                     " marked old without an earlier appearance");
            }
        }

        const auto tokens = whitespace_tokens(scene.prompt);
        for (int id : present) {
            auto it = scene.name_spans.find(id);
            if (it == scene.name_spans.end()) {
                emit(where + ": character " + std::to_string(id) + " has no name span");
                continue;
            }
            const auto* c = plan.find_character(id);
            if (c == nullptr) {
                continue;
            }
            const auto expect = whitespace_tokens(c->name);
            const TokenSpan& span = it->second;
            bool ok = span.start >= 0 && span.len == static_cast<int>(expect.size()) &&
                      span.start + span.len <= static_cast<int>(tokens.size());
            for (int j = 0; ok && j < span.len; ++j) {
                ok = tokens[span.start + j] == expect[j];
            }
            if (!ok) {
                emit(where + ": name span of character " + std::to_string(id) +
                     " does not match the name tokens");
            }
        }
        seen.insert(present.begin(), present.end());
    }
    for (const auto& c : plan.characters) {
        const int count = new_count.count(c.id) ? new_count[c.id] : 0;
        if (count != 1) {
            emit("character '" + c.name + "' is new in " + std::to_string(count) +
                 " scenes (expected exactly 1)");
        }
    }
    return diags;
}

std::string serialize_plan(const StoryPlan& plan) {
    json j;
    j["characters"] = json::array();
    for (const auto& c : plan.characters) {
        j["characters"].push_back({{"id", c.id}, {"name", c.name}, {"prompt", c.prompt}});
    }
    j["scenes"] = json::array();
    for (const auto& s : plan.scenes) {
        json spans = json::object();
        for (const auto& [id, span] : s.name_spans) {
            spans[std::to_string(id)] = {{"start", span.start}, {"len", span.len}};
        }
        j["scenes"].push_back({{"index", s.index},
                               {"prompt", s.prompt},
                               {"present", s.present},
                               {"new", s.new_ids},
                               {"old", s.old_ids},
                               {"name_spans", std::move(spans)}});
    }
    return j.dump(2) + "\n";
}

StoryPlan parse_plan_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("plan: invalid JSON: ") + e.what());
    }
    StoryPlan plan;
    try {
        for (const auto& c : j.at("characters")) {
            CharacterSpec spec;
            spec.id = c.at("id").get<int>();
            spec.name = c.at("name").get<std::string>();
            spec.prompt = c.at("prompt").get<std::string>();
            plan.characters.push_back(std::move(spec));
        }
        for (const auto& s : j.at("scenes")) {
            SceneSpec scene;
            scene.index = s.at("index").get<int>();
            scene.prompt = s.at("prompt").get<std::string>();
            scene.present = s.at("present").get<std::vector<int>>();
            scene.new_ids = s.at("new").get<std::vector<int>>();
            scene.old_ids = s.at("old").get<std::vector<int>>();
            for (const auto& [key, value] : s.at("name_spans").items()) {
                TokenSpan span;
                span.start = value.at("start").get<int>();
                span.len = value.at("len").get<int>();
                scene.name_spans[std::stoi(key)] = span;
            }
            plan.scenes.push_back(std::move(scene));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("plan: malformed document: ") + e.what());
    }
    const auto diags = validate_plan(plan);
    if (!diags.empty()) {
        throw std::invalid_argument("plan: invalid plan file: " + diags.front());
    }
    return plan;
}

}  // namespace isoattn

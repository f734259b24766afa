// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/script_parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <vector>

namespace isoattn {

namespace {

struct Line {
    int number;            // 1-based
    std::string text;
};

std::vector<Line> split_lines(const std::string& text) {
    std::vector<Line> lines;
    std::string current;
    int number = 1;
    for (char ch : text) {
        if (ch == '\n') {
            lines.push_back({number++, current});
            current.clear();
        } else if (ch != '\r') {
            current.push_back(ch);
        }
    }
    if (!current.empty()) {
        lines.push_back({number, current});
    }
    return lines;
}

std::string trim(const std::string& s, size_t* first_col = nullptr) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    if (first_col != nullptr) {
        *first_col = b;
    }
    return s.substr(b, e - b);
}

bool is_blank_or_comment(const std::string& s) {
    const std::string t = trim(s);
    return t.empty() || t.front() == '#';
}

}  // namespace

ParseError::ParseError(int line_, int col_, const std::string& msg)
    : std::runtime_error("line " + std::to_string(line_) + ", col " + std::to_string(col_) +
                         ": " + msg),
      line(line_),
      col(col_) {}

StoryPlan parse_script(const std::string& text) {
    std::vector<CharacterSpec> characters;
    std::vector<SceneDraft> drafts;
    std::map<std::string, int> by_name;
    std::map<int, int> declaration_line;  // character id -> line number
    std::vector<int> scene_lines;

    const auto lines = split_lines(text);
    int last_line = lines.empty() ? 1 : lines.back().number;

    for (const auto& line : lines) {
        if (is_blank_or_comment(line.text)) {
            continue;
        }
        size_t indent = 0;
        const std::string body = trim(line.text, &indent);

        if (body.rfind("character ", 0) == 0) {
            if (!drafts.empty()) {
                throw ParseError(line.number, static_cast<int>(indent) + 1,
                                 "character declarations must precede all scenes");
            }
            const size_t name_begin = indent + 10;
            const size_t colon = line.text.find(':', name_begin);
            if (colon == std::string::npos) {
                throw ParseError(line.number, static_cast<int>(line.text.size()) + 1,
                                 "expected ':' after the character name");
            }
            const std::string name = trim(line.text.substr(name_begin, colon - name_begin));
            if (name.empty()) {
                throw ParseError(line.number, static_cast<int>(name_begin) + 1,
                                 "character name is empty");
            }
            const std::string prompt = trim(line.text.substr(colon + 1));
            if (prompt.empty()) {
                throw ParseError(line.number, static_cast<int>(colon) + 2,
                                 "character prompt is empty");
            }
            if (by_name.count(name)) {
                throw ParseError(line.number, static_cast<int>(name_begin) + 1,
                                 "duplicate character name '" + name + "'");
            }
            const int id = static_cast<int>(characters.size());
            by_name[name] = id;
            declaration_line[id] = line.number;
            characters.push_back({id, name, prompt});
            continue;
        }

        if (body.rfind("scene", 0) == 0) {
            size_t pos = indent + 5;
            SceneDraft draft;
            // optional explicit cast: scene [Name, Name]: prompt
            size_t cursor = pos;
            while (cursor < line.text.size() &&
                   std::isspace(static_cast<unsigned char>(line.text[cursor]))) {
                ++cursor;
            }
            if (cursor < line.text.size() && line.text[cursor] == '[') {
                const size_t close = line.text.find(']', cursor);
                if (close == std::string::npos) {
                    throw ParseError(line.number, static_cast<int>(cursor) + 1,
                                     "unterminated cast list");
                }
                std::vector<int> cast;
                size_t item_begin = cursor + 1;
                while (item_begin <= close) {
                    size_t item_end = line.text.find(',', item_begin);
                    if (item_end == std::string::npos || item_end > close) {
                        item_end = close;
                    }
                    const std::string raw = line.text.substr(item_begin, item_end - item_begin);
                    const std::string name = trim(raw);
                    if (!name.empty()) {
                        auto it = by_name.find(name);
                        if (it == by_name.end()) {
                            const size_t name_pos = line.text.find(name, item_begin);
                            throw ParseError(line.number, static_cast<int>(name_pos) + 1,
                                             "unknown character '" + name + "'");
                        }
                        cast.push_back(it->second);
                    }
                    item_begin = item_end + 1;
                }
                draft.cast = std::move(cast);
                pos = close + 1;
            }
            const size_t colon = line.text.find(':', pos);
            if (colon == std::string::npos) {
                throw ParseError(line.number, static_cast<int>(pos) + 1,
                                 "expected ':' after 'scene'");
            }
            const std::string between = trim(line.text.substr(pos, colon - pos));
            if (!between.empty()) {
                throw ParseError(line.number, static_cast<int>(pos) + 1,
                                 "unexpected text before ':'");
            }
            draft.prompt = trim(line.text.substr(colon + 1));
            if (draft.prompt.empty()) {
                throw ParseError(line.number, static_cast<int>(colon) + 2,
                                 "scene prompt is empty");
            }
            scene_lines.push_back(line.number);
            drafts.push_back(std::move(draft));
            continue;
        }

        throw ParseError(line.number, static_cast<int>(indent) + 1,
                         "expected 'character <name>: ...' or 'scene: ...'");
    }

    if (drafts.empty()) {
        throw ParseError(last_line, 1, "script declares no scenes");
    }

    // Pre-checks that need line numbers: cast members must occur in their
    // prompt, and every declared character must appear somewhere.
    std::vector<std::vector<std::string>> name_tokens(characters.size());
    for (size_t i = 0; i < characters.size(); ++i) {
        name_tokens[i] = whitespace_tokens(characters[i].name);
    }
    std::vector<bool> used(characters.size(), false);
    for (size_t s = 0; s < drafts.size(); ++s) {
        const auto tokens = whitespace_tokens(drafts[s].prompt);
        if (drafts[s].cast.has_value()) {
            for (int id : *drafts[s].cast) {
                if (!find_token_span(tokens, name_tokens[id]).has_value()) {
                    throw ParseError(scene_lines[s], 1,
                                     "character '" + characters[id].name +
                                         "' is cast but its name does not occur in the prompt");
                }
                used[id] = true;
            }
        } else {
            for (size_t id = 0; id < characters.size(); ++id) {
                if (find_token_span(tokens, name_tokens[id]).has_value()) {
                    used[id] = true;
                }
            }
        }
    }
    for (size_t id = 0; id < characters.size(); ++id) {
        if (!used[id]) {
            throw ParseError(declaration_line[static_cast<int>(id)], 1,
                             "character '" + characters[id].name +
                                 "' never appears in any scene");
        }
    }

    try {
        return build_plan(std::move(characters), std::move(drafts));
    } catch (const std::invalid_argument& e) {
        // The pre-checks above should have caught everything build_plan can
        // reject; map any residue to a position-less parse error.
        throw ParseError(last_line, 1, e.what());
    }
}

}  // namespace isoattn

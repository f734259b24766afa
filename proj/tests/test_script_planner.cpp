// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <set>
#include <string>
#include <vector>

#include "isoattn/plan.hpp"
#include "isoattn/rng.hpp"
#include "isoattn/script_parser.hpp"

using namespace isoattn;

TEST_CASE("two characters, first-occurrence bookkeeping") {
    const StoryPlan plan = parse_script(
        "character Ana: a tall knight in polished armor\n"
        "character Brax: a grumpy wizard with a long beard\n"
        "scene: Ana walks through the castle gate\n"
        "scene: Ana meets Brax in the tower\n");
    REQUIRE(plan.characters.size() == 2);
    REQUIRE(plan.scenes.size() == 2);
    CHECK(plan.scenes[0].present == std::vector<int>{0});
    CHECK(plan.scenes[0].new_ids == std::vector<int>{0});
    CHECK(plan.scenes[0].old_ids.empty());
    CHECK(plan.scenes[1].present == std::vector<int>{0, 1});
    CHECK(plan.scenes[1].new_ids == std::vector<int>{1});
    CHECK(plan.scenes[1].old_ids == std::vector<int>{0});
    CHECK(validate_plan(plan).empty());
}

TEST_CASE("single scene, single character is all-new") {
    const StoryPlan plan = parse_script(
        "character Rex: a small brown dog\n"
        "scene: Rex naps in the sun\n");
    CHECK(plan.scenes[0].new_ids == std::vector<int>{0});
    CHECK(plan.scenes[0].old_ids.empty());
}

TEST_CASE("name spans match the name tokens") {
    const StoryPlan plan = parse_script(
        "character Old Tom: a weathered fisherman\n"
        "scene: the harbor wakes while Old Tom mends a net\n");
    const TokenSpan span = plan.scenes[0].name_spans.at(0);
    CHECK(span.start == 4);
    CHECK(span.len == 2);
    // Token match is exact: "Tom," would not have counted.
    const auto tokens = whitespace_tokens(plan.scenes[0].prompt);
    CHECK(tokens[span.start] == "Old");
    CHECK(tokens[span.start + 1] == "Tom");
}

TEST_CASE("explicit cast lists are authoritative") {
    const StoryPlan plan = parse_script(
        "character Ana: a tall knight\n"
        "character Brax: a grumpy wizard\n"
        "scene [Ana]: Ana argues while Brax listens\n"
        "scene: Brax and Ana drink tea\n");
    // Brax occurs in scene 0's prompt but is not cast there.
    CHECK(plan.scenes[0].present == std::vector<int>{0});
    CHECK(plan.scenes[1].new_ids == std::vector<int>{1});
    CHECK(plan.scenes[1].old_ids == std::vector<int>{0});
}

TEST_CASE("parse errors carry line and column") {
    SUBCASE("unknown character in a cast") {
        try {
            parse_script(
                "character Ana: a tall knight\n"
                "scene: Ana walks\n"
                "scene [Zorro]: Zorro duels Ana\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 3);
            CHECK(std::string(e.what()).find("unknown character 'Zorro'") !=
                  std::string::npos);
        }
    }
    SUBCASE("duplicate character name") {
        try {
            parse_script(
                "character Ana: a tall knight\n"
                "character Ana: a short knight\n"
                "scene: Ana walks\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
        }
    }
    SUBCASE("missing colon") {
        try {
            parse_script("character Ana a tall knight\nscene: Ana walks\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 1);
            CHECK(e.col >= 1);
        }
    }
    SUBCASE("character after a scene") {
        CHECK_THROWS_AS(parse_script("character Ana: a knight\n"
                                     "scene: Ana walks\n"
                                     "character Bo: a bard\n"),
                        ParseError);
    }
    SUBCASE("no scenes") {
        CHECK_THROWS_AS(parse_script("character Ana: a knight\n"), ParseError);
    }
    SUBCASE("declared character never appears") {
        try {
            parse_script(
                "character Ana: a knight\n"
                "character Bo: a bard\n"
                "scene: Ana walks alone\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("never appears") != std::string::npos);
        }
    }
    SUBCASE("junk line") {
        try {
            parse_script("once upon a time\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 1);
            CHECK(e.col == 1);
        }
    }
}

TEST_CASE("blank lines and comments are ignored") {
    const StoryPlan plan = parse_script(
        "# cast\n"
        "character Ana: a tall knight\n"
        "\n"
        "scene: Ana walks\n");
    CHECK(plan.characters.size() == 1);
    CHECK(plan.scenes.size() == 1);
}

TEST_CASE("parsing is deterministic and round-trips") {
    const std::string script =
        "character Ana: a tall knight\n"
        "character Bo: a bard with a lute\n"
        "scene: Ana walks the wall\n"
        "scene: Bo sings while Ana listens\n";
    const StoryPlan a = parse_script(script);
    const StoryPlan b = parse_script(script);
    CHECK(serialize_plan(a) == serialize_plan(b));

    const StoryPlan reparsed = parse_plan_text(serialize_plan(a));
    CHECK(serialize_plan(reparsed) == serialize_plan(a));
    CHECK(validate_plan(reparsed).empty());
}

TEST_CASE("validate_plan flags broken plans") {
    StoryPlan plan = parse_script(
        "character Ana: a tall knight\n"
        "scene: Ana walks\n"
        "scene: Ana rests\n");
    CHECK(validate_plan(plan).empty());

    SUBCASE("id in both new and old") {
        plan.scenes[1].new_ids = {0};
        // old still {0}: new/old overlap and the multiplicity invariant breaks
        const auto diags = validate_plan(plan);
        CHECK_FALSE(diags.empty());
    }
    SUBCASE("non-dense character ids") {
        plan.characters[0].id = 2;
        const auto diags = validate_plan(plan);
        CHECK_FALSE(diags.empty());
    }
    SUBCASE("old without earlier appearance") {
        plan.scenes[0].new_ids.clear();
        plan.scenes[0].old_ids = {0};
        const auto diags = validate_plan(plan);
        CHECK_FALSE(diags.empty());
    }
}

TEST_CASE("random scripts match the first-occurrence oracle") {
    Rng rng(808);
    const std::vector<std::string> names = {"Ada", "Bo", "Cyr", "Dana", "Edt", "Fay"};
    const std::vector<std::string> fillers = {"walks", "rests", "sings",  "waits",
                                              "reads", "runs",  "climbs", "naps"};
    for (int trial = 0; trial < 30; ++trial) {
        const int n_chars = 2 + static_cast<int>(rng.next_u64() % 5);
        const int n_scenes = 2 + static_cast<int>(rng.next_u64() % 7);

        // every character debuts somewhere; extras are sprinkled randomly
        std::vector<std::set<int>> casts(n_scenes);
        for (int c = 0; c < n_chars; ++c) {
            casts[rng.next_u64() % n_scenes].insert(c);
        }
        for (int s = 0; s < n_scenes; ++s) {
            for (int c = 0; c < n_chars; ++c) {
                if (rng.next_float() < 0.3f) {
                    casts[s].insert(c);
                }
            }
            if (casts[s].empty()) {
                casts[s].insert(static_cast<int>(rng.next_u64() % n_chars));
            }
        }

        std::string script;
        for (int c = 0; c < n_chars; ++c) {
            script += "character " + names[c] + ": wears a plain cloak number " +
                      std::to_string(c) + "\n";
        }
        for (int s = 0; s < n_scenes; ++s) {
            script += "scene:";
            for (int c : casts[s]) {
                script += " " + names[c] + " " + fillers[rng.next_u64() % fillers.size()] +
                          " and";
            }
            script += " nothing else happens\n";
        }

        const StoryPlan plan = parse_script(script);
        REQUIRE(plan.scenes.size() == static_cast<size_t>(n_scenes));
        CHECK(validate_plan(plan).empty());

        std::set<int> seen;
        std::vector<int> new_count(n_chars, 0);
        for (int s = 0; s < n_scenes; ++s) {
            std::vector<int> want_present(casts[s].begin(), casts[s].end());
            std::vector<int> want_new, want_old;
            for (int c : want_present) {
                if (seen.count(c)) {
                    want_old.push_back(c);
                } else {
                    want_new.push_back(c);
                    seen.insert(c);
                    ++new_count[c];
                }
            }
            CHECK(plan.scenes[s].present == want_present);
            CHECK(plan.scenes[s].new_ids == want_new);
            CHECK(plan.scenes[s].old_ids == want_old);
        }
        for (int c = 0; c < n_chars; ++c) {
            CHECK(new_count[c] == 1);
        }
    }
}

// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

#include "isoattn/plan.hpp"

namespace isoattn {

struct ParseError : std::runtime_error {
    int line;
    int col;
    ParseError(int line_, int col_, const std::string& msg);
};

/// Line-oriented story script:
///
///     character <Name>: <appearance prompt>     (all before the first scene)
///     scene: <scene prompt>                     (cast detected by exact name
///                                                occurrence in the prompt)
///     scene [Name, Name]: <scene prompt>        (explicit cast; every name
///                                                must be declared and occur
///                                                in the prompt)
///
/// Blank lines and lines starting with '#' are ignored. Names match on whole
/// whitespace tokens, so "Ana" does not match "Ana,". With an explicit cast
/// the list is authoritative: other declared names occurring in the prompt
/// are not treated as present.
StoryPlan parse_script(const std::string& text);

}  // namespace isoattn

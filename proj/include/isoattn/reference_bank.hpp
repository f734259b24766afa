// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "isoattn/mask.hpp"
#include "isoattn/matrix.hpp"

namespace isoattn {

/// Token rows captured for one character at one block, at the final denoising
/// step of the character's first scene. Rows are the raw block-input rows at
/// mask-1 positions, in row-major spatial order.
struct ReferenceEntry {
    int character_id = -1;
    int block_key = -1;
    Matrix tokens;  // count() x d
    int source_scene = -1;

    int count() const { return tokens.rows; }
};

struct ConcatLayoutEntry {
    int character_id = -1;
    int offset = 0;  // starting key column of this character's reference block
    int count = 0;
};

/// Column layout of Concat(image tokens, reference tokens...): image tokens
/// first, then one contiguous block per character in ascending id order.
struct ConcatLayout {
    int image_token_count = 0;
    std::vector<ConcatLayoutEntry> entries;

    int total_columns() const;
};

/// Write-once store of reference tokens keyed by (character, block).
class ReferenceBank {
public:
    /// Returns false (and remembers the skip) when the mask is degenerate.
    /// Throws on a duplicate store or shape mismatch.
    bool store_new(int character_id, int block_key, const Matrix& block_input,
                   const CharacterMask& mask, int source_scene);

    bool has(int character_id, int block_key) const;
    bool degenerate_skipped(int character_id, int block_key) const;
    const ReferenceEntry& get(int character_id, int block_key) const;

    /// Entries for the given characters at one block, ascending id, plus the
    /// concatenation layout. Throws if any character has no entry.
    std::pair<std::vector<const ReferenceEntry*>, ConcatLayout> fetch(
        std::vector<int> character_ids, int block_key, int image_token_count) const;

    std::vector<const ReferenceEntry*> all() const;
    size_t size() const { return entries_.size(); }

    void save(const std::filesystem::path& path) const;
    static ReferenceBank load(const std::filesystem::path& path);

private:
    std::map<std::pair<int, int>, ReferenceEntry> entries_;
    std::set<std::pair<int, int>> degenerate_;
};

}  // namespace isoattn

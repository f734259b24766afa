// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/reference_bank.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace isoattn {

namespace {

constexpr char kBankMagic[8] = {'I', 'S', 'O', 'B', 'A', 'N', 'K', '1'};

std::string key_name(int character_id, int block_key) {
    return "character " + std::to_string(character_id) + ", block " +
           std::to_string(block_key);
}

}  // namespace

int ConcatLayout::total_columns() const {
    int total = image_token_count;
    for (const auto& e : entries) {
        total += e.count;
    }
    return total;
}

bool ReferenceBank::store_new(int character_id, int block_key, const Matrix& block_input,
                              const CharacterMask& mask, int source_scene) {
    const auto key = std::make_pair(character_id, block_key);
    if (entries_.count(key) || degenerate_.count(key)) {
        throw std::logic_error("reference_bank: duplicate store for " +
                               key_name(character_id, block_key));
    }
    if (static_cast<size_t>(block_input.rows) != mask.bits.size()) {
        throw std::invalid_argument("reference_bank: mask resolution " +
                                    std::to_string(mask.bits.size()) +
                                    " does not match token rows " +
                                    std::to_string(block_input.rows));
    }
    if (mask.degenerate) {
        degenerate_.insert(key);
        return false;
    }
    const int n = mask.popcount();
    Matrix tokens(n, block_input.cols);
    int out = 0;
    for (int r = 0; r < block_input.rows; ++r) {
        if (!mask.bits[r]) {
            continue;
        }
        std::copy(block_input.row(r).begin(), block_input.row(r).end(),
                  tokens.row(out).begin());
        ++out;
    }
    ReferenceEntry entry;
    entry.character_id = character_id;
    entry.block_key = block_key;
    entry.tokens = std::move(tokens);
    entry.source_scene = source_scene;
    entries_.emplace(key, std::move(entry));
    return true;
}

bool ReferenceBank::has(int character_id, int block_key) const {
    return entries_.count({character_id, block_key}) > 0;
}

bool ReferenceBank::degenerate_skipped(int character_id, int block_key) const {
    return degenerate_.count({character_id, block_key}) > 0;
}

const ReferenceEntry& ReferenceBank::get(int character_id, int block_key) const {
    auto it = entries_.find({character_id, block_key});
    if (it == entries_.end()) {
        throw std::runtime_error("reference_bank: no stored reference for " +
                                 key_name(character_id, block_key));
    }
    return it->second;
}

std::pair<std::vector<const ReferenceEntry*>, ConcatLayout> ReferenceBank::fetch(
    std::vector<int> character_ids, int block_key, int image_token_count) const {
    std::sort(character_ids.begin(), character_ids.end());
    character_ids.erase(std::unique(character_ids.begin(), character_ids.end()),
                        character_ids.end());
    std::vector<const ReferenceEntry*> entries;
    ConcatLayout layout;
    layout.image_token_count = image_token_count;
    int offset = image_token_count;
    for (int id : character_ids) {
        const ReferenceEntry& entry = get(id, block_key);
        entries.push_back(&entry);
        layout.entries.push_back({id, offset, entry.count()});
        offset += entry.count();
    }
    return {std::move(entries), std::move(layout)};
}

std::vector<const ReferenceEntry*> ReferenceBank::all() const {
    std::vector<const ReferenceEntry*> out;
    out.reserve(entries_.size());
    for (const auto& [key, entry] : entries_) {
        out.push_back(&entry);
    }
    return out;
}

void ReferenceBank::save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("reference_bank: cannot open " + path.string());
    }
    f.write(kBankMagic, sizeof(kBankMagic));
    const uint32_t counts[2] = {static_cast<uint32_t>(entries_.size()),
                                static_cast<uint32_t>(degenerate_.size())};
    f.write(reinterpret_cast<const char*>(counts), sizeof(counts));
    for (const auto& [key, e] : entries_) {
        const int32_t head[5] = {e.character_id, e.block_key, e.source_scene,
                                 e.tokens.rows, e.tokens.cols};
        f.write(reinterpret_cast<const char*>(head), sizeof(head));
        f.write(reinterpret_cast<const char*>(e.tokens.data.data()),
                static_cast<std::streamsize>(e.tokens.data.size() * sizeof(float)));
    }
    for (const auto& [character_id, block_key] : degenerate_) {
        const int32_t head[2] = {character_id, block_key};
        f.write(reinterpret_cast<const char*>(head), sizeof(head));
    }
    if (!f) {
        throw std::runtime_error("reference_bank: write failed for " + path.string());
    }
}

ReferenceBank ReferenceBank::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("reference_bank: cannot open " + path.string());
    }
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kBankMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("reference_bank: bad magic in " + path.string());
    }
    uint32_t counts[2];
    f.read(reinterpret_cast<char*>(counts), sizeof(counts));
    ReferenceBank bank;
    for (uint32_t i = 0; i < counts[0] && f; ++i) {
        int32_t head[5];
        f.read(reinterpret_cast<char*>(head), sizeof(head));
        if (!f || head[3] <= 0 || head[4] <= 0) {
            break;
        }
        ReferenceEntry e;
        e.character_id = head[0];
        e.block_key = head[1];
        e.source_scene = head[2];
        e.tokens = Matrix(head[3], head[4]);
        f.read(reinterpret_cast<char*>(e.tokens.data.data()),
               static_cast<std::streamsize>(e.tokens.data.size() * sizeof(float)));
        bank.entries_.emplace(std::make_pair(e.character_id, e.block_key), std::move(e));
    }
    for (uint32_t i = 0; i < counts[1] && f; ++i) {
        int32_t head[2];
        f.read(reinterpret_cast<char*>(head), sizeof(head));
        if (f) {
            bank.degenerate_.insert({head[0], head[1]});
        }
    }
    if (!f) {
        throw std::runtime_error("reference_bank: truncated file " + path.string());
    }
    return bank;
}

}  // namespace isoattn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace nmt {

// Byte-pair subword tokenizer. Source and target sides each train their own
// model; nothing here is shared between languages.

constexpr int32_t kPadId = 0;
constexpr int32_t kBosId = 1;
constexpr int32_t kEosId = 2;
constexpr int32_t kUnkId = 3;
constexpr int32_t kNumSpecials = 4;

// Word-initial subwords carry this prefix (U+2581), which makes decoding a
// pure string operation: concatenate, turn markers into spaces, trim.
extern const std::string kWordMarker;

struct BpeModel {
    std::map<std::string, int32_t> vocab;
    std::vector<std::string> id_to_token;
    std::vector<std::pair<std::string, std::string>> merges;
    // rank = position in merges; encode always prefers the earliest merge
    std::map<std::pair<std::string, std::string>, int32_t> merge_rank;

    int32_t vocab_size() const { return static_cast<int32_t>(id_to_token.size()); }
};

// Collapses whitespace runs to single spaces and trims the ends. Applied
// before both training and encoding so the two always agree.
std::string normalize_line(const std::string& line);

// Splits a string into UTF-8 code points; malformed bytes pass through as
// single symbols rather than aborting the pipeline.
std::vector<std::string> utf8_symbols(const std::string& word);

BpeModel train_bpe(const std::vector<std::string>& lines, int32_t vocab_size);

// BOS ... EOS framing; symbols never seen in training become UNK.
std::vector<int32_t> encode_line(const BpeModel& m, const std::string& text);

// Inverse of encode on normalized text. Skips PAD/BOS/EOS.
std::string decode_ids(const BpeModel& m, const std::vector<int32_t>& ids);

std::string serialize_bpe(const BpeModel& m);
BpeModel parse_bpe(const std::string& content);
void save_bpe(const BpeModel& m, const std::string& path);
BpeModel load_bpe(const std::string& path);

} // namespace nmt

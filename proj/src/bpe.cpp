// SPDX-License-Identifier: Apache-2.0
#include "nmt/bpe.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "nmt/errors.hpp"
#include "nmt/io.hpp"

namespace nmt {

const std::string kWordMarker = "\xE2\x96\x81"; // U+2581

namespace {

const char* kSpecialTokens[kNumSpecials] = {"<pad>", "<bos>", "<eos>", "<unk>"};

using SymbolSeq = std::vector<std::string>;
using Pair = std::pair<std::string, std::string>;

std::vector<std::string> split_words(const std::string& normalized) {
    std::vector<std::string> words;
    std::istringstream ss(normalized);
    std::string w;
    while (ss >> w) words.push_back(w);
    return words;
}

SymbolSeq word_symbols(const std::string& word) {
    SymbolSeq syms;
    syms.push_back(kWordMarker);
    for (auto& s : utf8_symbols(word)) syms.push_back(std::move(s));
    return syms;
}

void apply_merge(SymbolSeq& seq, const Pair& p) {
    SymbolSeq out;
    out.reserve(seq.size());
    for (size_t i = 0; i < seq.size(); ++i) {
        if (i + 1 < seq.size() && seq[i] == p.first && seq[i + 1] == p.second) {
            out.push_back(p.first + p.second);
            ++i;
        } else {
            out.push_back(seq[i]);
        }
    }
    seq = std::move(out);
}

void add_token(BpeModel& m, const std::string& tok) {
    int32_t id = m.vocab_size();
    m.vocab.emplace(tok, id);
    m.id_to_token.push_back(tok);
}

} // namespace

std::string normalize_line(const std::string& line) {
    std::string out;
    out.reserve(line.size());
    bool in_space = true; // drop leading whitespace
    for (char c : line) {
        bool ws = c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
        if (ws) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<std::string> utf8_symbols(const std::string& word) {
    std::vector<std::string> syms;
    size_t i = 0;
    while (i < word.size()) {
        unsigned char c = static_cast<unsigned char>(word[i]);
        size_t len = 1;
        if ((c & 0x80u) == 0)
            len = 1;
        else if ((c & 0xE0u) == 0xC0u)
            len = 2;
        else if ((c & 0xF0u) == 0xE0u)
            len = 3;
        else if ((c & 0xF8u) == 0xF0u)
            len = 4;
        if (i + len > word.size()) len = 1;
        // continuation bytes must look like 10xxxxxx, else fall back to 1 byte
        for (size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(word[i + k]) & 0xC0u) != 0x80u) {
                len = 1;
                break;
            }
        }
        syms.push_back(word.substr(i, len));
        i += len;
    }
    return syms;
}

BpeModel train_bpe(const std::vector<std::string>& lines, int32_t vocab_size) {
    // word type → (symbol sequence, corpus frequency)
    std::map<std::string, int64_t> word_freq;
    for (const auto& line : lines)
        for (const auto& w : split_words(normalize_line(line))) ++word_freq[w];
    if (word_freq.empty()) throw DataError("tokenizer training corpus has no words");

    std::set<std::string> base_symbols;
    base_symbols.insert(kWordMarker);
    for (const auto& [w, f] : word_freq)
        for (const auto& s : utf8_symbols(w)) base_symbols.insert(s);

    int32_t base_size = kNumSpecials + static_cast<int32_t>(base_symbols.size());
    if (vocab_size <= base_size)
        throw ConfigError("vocab size " + std::to_string(vocab_size) + " does not cover " +
                          std::to_string(base_size) + " base symbols");

    BpeModel m;
    for (const char* s : kSpecialTokens) add_token(m, s);
    for (const auto& s : base_symbols) add_token(m, s);

    std::vector<std::pair<SymbolSeq, int64_t>> words;
    words.reserve(word_freq.size());
    for (const auto& [w, f] : word_freq) words.emplace_back(word_symbols(w), f);

    while (m.vocab_size() < vocab_size) {
        // std::map keys iterate sorted, so scanning with a strict > keeps the
        // lexicographically smallest pair on frequency ties.
        std::map<Pair, int64_t> counts;
        for (const auto& [seq, f] : words)
            for (size_t i = 0; i + 1 < seq.size(); ++i) counts[{seq[i], seq[i + 1]}] += f;
        Pair best;
        int64_t best_count = 0;
        for (const auto& [p, c] : counts) {
            if (c > best_count) {
                best_count = c;
                best = p;
            }
        }
        if (best_count < 2) break;
        m.merges.push_back(best);
        m.merge_rank.emplace(best, static_cast<int32_t>(m.merges.size() - 1));
        add_token(m, best.first + best.second);
        for (auto& [seq, f] : words) apply_merge(seq, best);
    }
    return m;
}

std::vector<int32_t> encode_line(const BpeModel& m, const std::string& text) {
    std::vector<int32_t> ids;
    ids.push_back(kBosId);
    for (const auto& w : split_words(normalize_line(text))) {
        SymbolSeq seq = word_symbols(w);
        // repeatedly take the earliest-learned merge present anywhere in the
        // word; equivalent to replaying merges in training order
        while (seq.size() > 1) {
            int32_t best_rank = -1;
            for (size_t i = 0; i + 1 < seq.size(); ++i) {
                auto it = m.merge_rank.find({seq[i], seq[i + 1]});
                if (it != m.merge_rank.end() && (best_rank < 0 || it->second < best_rank))
                    best_rank = it->second;
            }
            if (best_rank < 0) break;
            apply_merge(seq, m.merges[static_cast<size_t>(best_rank)]);
        }
        for (const auto& s : seq) {
            auto it = m.vocab.find(s);
            ids.push_back(it == m.vocab.end() ? kUnkId : it->second);
        }
    }
    ids.push_back(kEosId);
    return ids;
}

std::string decode_ids(const BpeModel& m, const std::vector<int32_t>& ids) {
    std::string joined;
    for (int32_t id : ids) {
        if (id == kPadId || id == kBosId || id == kEosId) continue;
        if (id < 0 || id >= m.vocab_size())
            throw IndexError("token id " + std::to_string(id) + " outside vocab of " +
                             std::to_string(m.vocab_size()));
        joined += m.id_to_token[static_cast<size_t>(id)];
    }
    std::string out;
    size_t i = 0;
    while (i < joined.size()) {
        if (joined.compare(i, kWordMarker.size(), kWordMarker) == 0) {
            if (!out.empty()) out.push_back(' ');
            i += kWordMarker.size();
        } else {
            out.push_back(joined[i]);
            ++i;
        }
    }
    return out;
}

std::string serialize_bpe(const BpeModel& m) {
    std::ostringstream out;
    out << "bpe v1 " << m.vocab_size() << " " << m.merges.size() << "\n";
    for (int32_t id = 0; id < m.vocab_size(); ++id)
        out << m.id_to_token[static_cast<size_t>(id)] << "\t" << id << "\n";
    out << "#MERGES\n";
    for (const auto& [a, b] : m.merges) out << a << " " << b << "\n";
    return out.str();
}

BpeModel parse_bpe(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw DataError("tokenizer model file is empty");
    std::istringstream head(line);
    std::string magic, version;
    int64_t vocab_n = -1, merges_n = -1;
    head >> magic >> version >> vocab_n >> merges_n;
    if (magic != "bpe" || version != "v1" || vocab_n < kNumSpecials || merges_n < 0)
        throw DataError("bad tokenizer model header: " + line);

    BpeModel m;
    for (int64_t i = 0; i < vocab_n; ++i) {
        if (!std::getline(in, line)) throw DataError("tokenizer model truncated in vocab section");
        size_t tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("bad vocab entry: " + line);
        std::string tok = line.substr(0, tab);
        int64_t id = std::stoll(line.substr(tab + 1));
        if (id != static_cast<int64_t>(m.id_to_token.size()))
            throw DataError("vocab ids must be contiguous from 0, got " + line);
        add_token(m, tok);
    }
    for (int32_t s = 0; s < kNumSpecials; ++s)
        if (m.id_to_token[static_cast<size_t>(s)] != kSpecialTokens[s])
            throw DataError("special token slot " + std::to_string(s) + " holds " + m.id_to_token[s]);
    if (!std::getline(in, line) || line != "#MERGES") throw DataError("missing #MERGES separator");
    for (int64_t i = 0; i < merges_n; ++i) {
        if (!std::getline(in, line)) throw DataError("tokenizer model truncated in merges section");
        size_t sp = line.find(' ');
        if (sp == std::string::npos) throw DataError("bad merge entry: " + line);
        Pair p{line.substr(0, sp), line.substr(sp + 1)};
        if (!m.vocab.count(p.first + p.second))
            throw DataError("merge output not in vocab: " + p.first + p.second);
        m.merges.push_back(p);
        m.merge_rank.emplace(std::move(p), static_cast<int32_t>(i));
    }
    return m;
}

void save_bpe(const BpeModel& m, const std::string& path) { io::atomic_write_file(path, serialize_bpe(m)); }

BpeModel load_bpe(const std::string& path) { return parse_bpe(io::read_text_file(path)); }

} // namespace nmt

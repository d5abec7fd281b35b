// SPDX-License-Identifier: Apache-2.0
#include "nmt/synth.hpp"

#include <algorithm>

#include "nmt/errors.hpp"
#include "nmt/io.hpp"

namespace nmt {

namespace {

// separate sub-stream per artifact so adding one corpus never shifts another
enum : uint64_t {
    kStreamLexicon = 0x1e,
    kStreamMonoSrcText = 0x21,
    kStreamMonoTgtText = 0x22,
    kStreamTrainPairs = 0x23,
    kStreamDevPairs = 0x24,
    kStreamTestPairs = 0x25,
    kStreamMonoDevSrc = 0x26,
    kStreamMonoDevTgt = 0x27,
};

std::vector<std::string> syllables(const std::vector<std::string>& consonants) {
    static const char* vowels[] = {"a", "e", "i", "o", "u"};
    std::vector<std::string> out;
    for (const auto& c : consonants)
        for (const auto* v : vowels) out.push_back(c + v);
    return out;
}

std::vector<std::string> word_inventory(const std::vector<std::string>& consonants, int64_t count, Rng& rng) {
    auto syl = syllables(consonants);
    std::vector<std::string> pairs;
    for (const auto& a : syl)
        for (const auto& b : syl) pairs.push_back(a + b);
    if (count > static_cast<int64_t>(pairs.size()))
        throw ConfigError("word_types " + std::to_string(count) + " exceeds the syllable-pair inventory");
    rng.shuffle(pairs);
    pairs.resize(static_cast<size_t>(count));
    return pairs;
}

// inverse-CDF sampling over 1/(rank+2) weights
int64_t zipf_index(Rng& rng, const std::vector<double>& cumulative) {
    double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<int64_t>(it - cumulative.begin());
}

std::vector<double> zipf_cumulative(int64_t n) {
    std::vector<double> c;
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        sum += 1.0 / static_cast<double>(i + 2);
        c.push_back(sum);
    }
    return c;
}

} // namespace

SynthLexicon make_lexicon(const SynthSpec& spec) {
    if (spec.word_types < 2) throw ConfigError("word_types must be at least 2");
    SynthLexicon lex;
    Rng src_rng(mix_seed(spec.seed, kStreamLexicon, 1));
    Rng tgt_rng(mix_seed(spec.seed, kStreamLexicon, 2));
    lex.src_words = word_inventory({"b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "z"},
                                   spec.word_types, src_rng);
    lex.tgt_words = word_inventory({"c", "f", "h", "j", "q", "v", "w", "x", "y"},
                                   2 * spec.word_types, tgt_rng);
    return lex;
}

std::vector<int64_t> sample_sentence(Rng& rng, const SynthSpec& spec) {
    if (spec.min_len < 1 || spec.max_len < spec.min_len)
        throw ConfigError("sentence length bounds must satisfy 1 <= min_len <= max_len");
    static thread_local std::vector<double> cumulative;
    if (cumulative.size() != static_cast<size_t>(spec.word_types)) cumulative = zipf_cumulative(spec.word_types);
    int64_t len = spec.min_len + static_cast<int64_t>(rng.below(static_cast<uint64_t>(spec.max_len - spec.min_len + 1)));
    std::vector<int64_t> out;
    for (int64_t i = 0; i < len; ++i) out.push_back(zipf_index(rng, cumulative));
    return out;
}

std::vector<int64_t> reorder_for_tgt(const std::vector<int64_t>& indices) {
    std::vector<int64_t> out = indices;
    for (size_t i = 0; i + 1 < out.size(); i += 2)
        if (out[i] % 2 == 1) std::swap(out[i], out[i + 1]);
    return out;
}

std::vector<int64_t> tgt_word_indices(const std::vector<int64_t>& reordered, Rng& rng) {
    std::vector<int64_t> out;
    for (int64_t idx : reordered) out.push_back(2 * idx + static_cast<int64_t>(rng.below(2)));
    return out;
}

std::string render(const std::vector<std::string>& words, const std::vector<int64_t>& indices) {
    std::string line;
    for (size_t i = 0; i < indices.size(); ++i) {
        int64_t idx = indices[i];
        if (idx < 0 || idx >= static_cast<int64_t>(words.size()))
            throw ContractError("word index " + std::to_string(idx) + " outside the lexicon");
        if (i) line += ' ';
        line += words[static_cast<size_t>(idx)];
    }
    return line;
}

void write_synth_task(const std::string& dir, const SynthSpec& spec) {
    SynthLexicon lex = make_lexicon(spec);
    io::ensure_dir(dir);

    auto write_lines = [&](const std::string& name, const std::vector<std::string>& lines) {
        std::string body;
        for (const auto& l : lines) {
            body += l;
            body += '\n';
        }
        io::atomic_write_file(dir + "/" + name, body);
    };

    auto mono = [&](uint64_t stream, int64_t count, bool tgt_side) {
        Rng rng(mix_seed(spec.seed, stream));
        std::vector<std::string> lines;
        for (int64_t i = 0; i < count; ++i) {
            auto latent = sample_sentence(rng, spec);
            lines.push_back(tgt_side ? render(lex.tgt_words, tgt_word_indices(reorder_for_tgt(latent), rng))
                                     : render(lex.src_words, latent));
        }
        return lines;
    };

    auto pairs = [&](uint64_t stream, int64_t count) {
        Rng rng(mix_seed(spec.seed, stream));
        std::pair<std::vector<std::string>, std::vector<std::string>> out;
        for (int64_t i = 0; i < count; ++i) {
            auto latent = sample_sentence(rng, spec);
            out.first.push_back(render(lex.src_words, latent));
            out.second.push_back(render(lex.tgt_words, tgt_word_indices(reorder_for_tgt(latent), rng)));
        }
        return out;
    };

    write_lines("mono.src", mono(kStreamMonoSrcText, spec.mono_lines, false));
    write_lines("mono.tgt", mono(kStreamMonoTgtText, spec.mono_lines, true));
    write_lines("mono-dev.src", mono(kStreamMonoDevSrc, spec.mono_dev_lines, false));
    write_lines("mono-dev.tgt", mono(kStreamMonoDevTgt, spec.mono_dev_lines, true));

    auto train = pairs(kStreamTrainPairs, spec.train_pairs);
    auto dev = pairs(kStreamDevPairs, spec.dev_pairs);
    auto test = pairs(kStreamTestPairs, spec.test_pairs);
    write_lines("train.src", train.first);
    write_lines("train.tgt", train.second);
    write_lines("dev.src", dev.first);
    write_lines("dev.tgt", dev.second);
    write_lines("test.src", test.first);
    write_lines("test.tgt", test.second);

    std::string tsv;
    for (size_t i = 0; i < lex.src_words.size(); ++i)
        tsv += lex.src_words[i] + "\t" + lex.tgt_words[2 * i] + "\t" + lex.tgt_words[2 * i + 1] + "\n";
    io::atomic_write_file(dir + "/lexicon.tsv", tsv);
}

} // namespace nmt

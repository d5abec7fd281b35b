// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmt/rng.hpp"

namespace nmt {

// Deterministic toy translation task: two invented word inventories joined by
// a lexicon, a local reordering rule on the target side, and two target
// synonyms per source word picked by coin at generation time. The synonym
// coin is irreducible noise: a model can only beat it on the training pairs
// by memorizing them, which is what makes overfitting (and the value of
// anchoring to a monolingual LM) observable at desk scale.

struct SynthSpec {
    uint64_t seed = 604750;
    int64_t word_types = 100;
    int64_t mono_lines = 10000;
    int64_t mono_dev_lines = 500;
    int64_t train_pairs = 600;
    int64_t dev_pairs = 150;
    int64_t test_pairs = 150;
    int64_t min_len = 3;
    int64_t max_len = 12;
};

struct SynthLexicon {
    std::vector<std::string> src_words;
    // two synonyms per source word: src_words[i] -> tgt_words[2i], tgt_words[2i+1]
    std::vector<std::string> tgt_words;
};

SynthLexicon make_lexicon(const SynthSpec& spec);

// Word indices, length in [min_len, max_len], Zipf-ish frequency skew.
std::vector<int64_t> sample_sentence(Rng& rng, const SynthSpec& spec);

// Target-side word order: each adjacent pair (2k, 2k+1) swaps iff the word
// index at 2k is odd — a purely local, fully deterministic rule.
std::vector<int64_t> reorder_for_tgt(const std::vector<int64_t>& indices);

// Reordered source indices -> indices into tgt_words, flipping the synonym
// coin once per emitted word.
std::vector<int64_t> tgt_word_indices(const std::vector<int64_t>& reordered, Rng& rng);

std::string render(const std::vector<std::string>& words, const std::vector<int64_t>& indices);

// Writes mono.{src,tgt}, mono-dev.{src,tgt}, train/dev/test.{src,tgt} and a
// lexicon.tsv into dir. Fully determined by spec; reruns are byte-identical.
void write_synth_task(const std::string& dir, const SynthSpec& spec);

} // namespace nmt

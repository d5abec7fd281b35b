// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nmt/bpe.hpp"
#include "nmt/rng.hpp"

namespace nmt {

struct MonoExample {
    std::vector<int32_t> ids; // BOS ... EOS
    int64_t line_no = 0;      // 1-based position in the source file
};

struct ParallelExample {
    std::vector<int32_t> src_ids;
    std::vector<int32_t> tgt_ids;
    int64_t line_no = 0;
};

enum class BatchSide { mono_src, mono_tgt, parallel };

// Padded token matrices, row-major rows x len. Monolingual batches fill only
// the src fields regardless of which language they hold; `side` says which
// model consumes them. Masks are 1.0 at real tokens, 0.0 at padding.
struct Batch {
    BatchSide side = BatchSide::parallel;
    int64_t rows = 0;
    int64_t src_len = 0;
    int64_t tgt_len = 0;
    std::vector<int32_t> src;
    std::vector<int32_t> tgt;
    std::vector<float> src_mask;
    std::vector<float> tgt_mask;
};

std::vector<MonoExample> load_mono_corpus(const std::string& path, const BpeModel& model);
std::vector<ParallelExample> load_parallel_corpus(const std::string& src_path, const std::string& tgt_path,
                                                  const BpeModel& src_model, const BpeModel& tgt_model);

// Length-bucketed greedy packing under a token budget. The budget counts
// padded matrix cells of the longer side: rows * max_len <= token_budget.
// Bucket membership, in-bucket order, and final batch order all come from
// one Rng(seed), so a seed pins the whole epoch.
std::vector<std::vector<size_t>> plan_batches(const std::vector<int64_t>& lengths, int64_t token_budget,
                                              int64_t bucket_width, Rng& rng);

std::vector<Batch> make_batches(const std::vector<MonoExample>& examples, BatchSide side, int64_t token_budget,
                                int64_t bucket_width, uint64_t seed);
std::vector<Batch> make_batches(const std::vector<ParallelExample>& examples, int64_t token_budget,
                                int64_t bucket_width, uint64_t seed);

constexpr int64_t kDefaultBucketWidth = 8;

// Deterministic shuffle-split; the held-out part gets round(n * fraction)
// examples. Degenerate results (either side empty) are a config error.
template <class Example>
std::pair<std::vector<Example>, std::vector<Example>> split_held_out(const std::vector<Example>& examples,
                                                                     double fraction, uint64_t seed);

} // namespace nmt

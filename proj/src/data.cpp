// SPDX-License-Identifier: Apache-2.0
#include "nmt/data.hpp"

#include <algorithm>
#include <cmath>

#include "nmt/errors.hpp"
#include "nmt/io.hpp"

namespace nmt {

std::vector<MonoExample> load_mono_corpus(const std::string& path, const BpeModel& model) {
    std::ifstream in = io::open_input(path);
    std::vector<MonoExample> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (normalize_line(line).empty()) continue;
        out.push_back({encode_line(model, line), line_no});
    }
    return out;
}

std::vector<ParallelExample> load_parallel_corpus(const std::string& src_path, const std::string& tgt_path,
                                                  const BpeModel& src_model, const BpeModel& tgt_model) {
    std::ifstream src_in = io::open_input(src_path);
    std::ifstream tgt_in = io::open_input(tgt_path);
    std::vector<ParallelExample> out;
    std::string src_line, tgt_line;
    int64_t line_no = 0;
    while (true) {
        bool src_ok = static_cast<bool>(std::getline(src_in, src_line));
        bool tgt_ok = static_cast<bool>(std::getline(tgt_in, tgt_line));
        ++line_no;
        if (!src_ok && !tgt_ok) break;
        if (src_ok != tgt_ok)
            throw DataError("parallel files diverge at line " + std::to_string(line_no) + ": " +
                            (src_ok ? tgt_path : src_path) + " ended first");
        bool src_empty = normalize_line(src_line).empty();
        bool tgt_empty = normalize_line(tgt_line).empty();
        if (src_empty && tgt_empty) continue;
        out.push_back({encode_line(src_model, src_line), encode_line(tgt_model, tgt_line), line_no});
    }
    return out;
}

std::vector<std::vector<size_t>> plan_batches(const std::vector<int64_t>& lengths, int64_t token_budget,
                                              int64_t bucket_width, Rng& rng) {
    if (token_budget < 1) throw ConfigError("token budget must be positive");
    if (bucket_width < 1) throw ConfigError("bucket width must be positive");

    std::map<int64_t, std::vector<size_t>> buckets;
    for (size_t i = 0; i < lengths.size(); ++i) {
        if (lengths[i] > token_budget)
            throw DataError("example " + std::to_string(i) + " has length " + std::to_string(lengths[i]) +
                            " exceeding the token budget " + std::to_string(token_budget));
        buckets[(lengths[i] - 1) / bucket_width].push_back(i);
    }

    std::vector<std::vector<size_t>> batches;
    for (auto& [bucket, members] : buckets) {
        rng.shuffle(members);
        std::vector<size_t> current;
        int64_t max_len = 0;
        for (size_t idx : members) {
            int64_t grown = std::max(max_len, lengths[idx]);
            if (!current.empty() &&
                static_cast<int64_t>(current.size() + 1) * grown > token_budget) {
                batches.push_back(std::move(current));
                current.clear();
                max_len = 0;
                grown = lengths[idx];
            }
            current.push_back(idx);
            max_len = grown;
        }
        if (!current.empty()) batches.push_back(std::move(current));
    }
    rng.shuffle(batches);
    return batches;
}

namespace {

void pad_into(const std::vector<const std::vector<int32_t>*>& rows, std::vector<int32_t>& ids,
              std::vector<float>& mask, int64_t& out_len) {
    int64_t max_len = 0;
    for (const auto* r : rows) max_len = std::max<int64_t>(max_len, static_cast<int64_t>(r->size()));
    out_len = max_len;
    ids.assign(rows.size() * static_cast<size_t>(max_len), kPadId);
    mask.assign(rows.size() * static_cast<size_t>(max_len), 0.0f);
    for (size_t r = 0; r < rows.size(); ++r) {
        for (size_t c = 0; c < rows[r]->size(); ++c) {
            ids[r * static_cast<size_t>(max_len) + c] = (*rows[r])[c];
            mask[r * static_cast<size_t>(max_len) + c] = 1.0f;
        }
    }
}

} // namespace

std::vector<Batch> make_batches(const std::vector<MonoExample>& examples, BatchSide side, int64_t token_budget,
                                int64_t bucket_width, uint64_t seed) {
    std::vector<int64_t> lengths(examples.size());
    for (size_t i = 0; i < examples.size(); ++i) lengths[i] = static_cast<int64_t>(examples[i].ids.size());
    Rng rng(seed);
    std::vector<Batch> out;
    for (const auto& group : plan_batches(lengths, token_budget, bucket_width, rng)) {
        Batch b;
        b.side = side;
        b.rows = static_cast<int64_t>(group.size());
        std::vector<const std::vector<int32_t>*> rows;
        for (size_t idx : group) rows.push_back(&examples[idx].ids);
        pad_into(rows, b.src, b.src_mask, b.src_len);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<Batch> make_batches(const std::vector<ParallelExample>& examples, int64_t token_budget,
                                int64_t bucket_width, uint64_t seed) {
    std::vector<int64_t> lengths(examples.size());
    for (size_t i = 0; i < examples.size(); ++i)
        lengths[i] = std::max<int64_t>(static_cast<int64_t>(examples[i].src_ids.size()),
                                       static_cast<int64_t>(examples[i].tgt_ids.size()));
    Rng rng(seed);
    std::vector<Batch> out;
    for (const auto& group : plan_batches(lengths, token_budget, bucket_width, rng)) {
        Batch b;
        b.side = BatchSide::parallel;
        b.rows = static_cast<int64_t>(group.size());
        std::vector<const std::vector<int32_t>*> src_rows, tgt_rows;
        for (size_t idx : group) {
            src_rows.push_back(&examples[idx].src_ids);
            tgt_rows.push_back(&examples[idx].tgt_ids);
        }
        pad_into(src_rows, b.src, b.src_mask, b.src_len);
        pad_into(tgt_rows, b.tgt, b.tgt_mask, b.tgt_len);
        out.push_back(std::move(b));
    }
    return out;
}

template <class Example>
std::pair<std::vector<Example>, std::vector<Example>> split_held_out(const std::vector<Example>& examples,
                                                                     double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("held-out fraction must lie strictly between 0 and 1");
    size_t n = examples.size();
    size_t held = static_cast<size_t>(std::llround(static_cast<double>(n) * fraction));
    if (held == 0 || held == n)
        throw ConfigError("held-out split is degenerate: " + std::to_string(n - held) + "/" +
                          std::to_string(held) + " from " + std::to_string(n) + " examples");
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::pair<std::vector<Example>, std::vector<Example>> out;
    for (size_t i = 0; i < n; ++i) {
        if (i < held)
            out.second.push_back(examples[order[i]]);
        else
            out.first.push_back(examples[order[i]]);
    }
    return out;
}

template std::pair<std::vector<MonoExample>, std::vector<MonoExample>>
split_held_out(const std::vector<MonoExample>&, double, uint64_t);
template std::pair<std::vector<ParallelExample>, std::vector<ParallelExample>>
split_held_out(const std::vector<ParallelExample>&, double, uint64_t);

} // namespace nmt

// SPDX-License-Identifier: Apache-2.0
#include "nmt/beam.hpp"

#include <algorithm>
#include <cmath>

#include "nmt/bpe.hpp"
#include "nmt/errors.hpp"
#include "nmt/forward.hpp"

namespace nmt {

namespace {

struct Candidate {
    double cum;
    int32_t token;
    int32_t parent;
};

// tie-breaking is part of the decoding contract: higher score first, then
// lower token id, then lower parent slot
bool candidate_before(const Candidate& a, const Candidate& b) {
    if (a.cum != b.cum) return a.cum > b.cum;
    if (a.token != b.token) return a.token < b.token;
    return a.parent < b.parent;
}

bool hypothesis_before(const BeamHypothesis& a, const BeamHypothesis& b, double alpha) {
    double sa = a.score(alpha), sb = b.score(alpha);
    if (sa != sb) return sa > sb;
    return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(), b.tokens.end());
}

std::vector<std::vector<float>> score_rows(const StepScorer& scorer, const std::vector<BeamHypothesis>& live,
                                           int64_t vocab) {
    std::vector<std::vector<int32_t>> prefixes;
    prefixes.reserve(live.size());
    for (const auto& h : live) prefixes.push_back(h.tokens);
    auto rows = scorer(prefixes);
    if (rows.size() != live.size()) throw ContractError("step scorer returned the wrong number of rows");
    for (const auto& r : rows)
        if (static_cast<int64_t>(r.size()) != vocab)
            throw ContractError("step scorer row width does not match the vocabulary");
    return rows;
}

} // namespace

double BeamHypothesis::score(double alpha) const {
    double emitted = static_cast<double>(tokens.size()) - 1.0;
    if (emitted < 1.0) return cum_logprob;
    return cum_logprob / std::pow(emitted, alpha);
}

BeamHypothesis beam_search_core(const StepScorer& scorer, int64_t vocab, int64_t beam_size, double alpha,
                                int64_t max_len) {
    if (beam_size < 1) throw ConfigError("beam size must be at least 1");
    if (max_len < 1) throw ConfigError("max decode length must be at least 1");
    if (vocab <= kEosId) throw ConfigError("vocabulary too small to contain EOS");

    std::vector<BeamHypothesis> live{{{kBosId}, 0.0, false, false}};
    std::vector<BeamHypothesis> finished;

    for (int64_t step = 0; step < max_len && !live.empty(); ++step) {
        auto rows = score_rows(scorer, live, vocab);
        std::vector<Candidate> cands;
        cands.reserve(live.size() * static_cast<size_t>(vocab));
        for (size_t i = 0; i < live.size(); ++i)
            for (int32_t v = 0; v < vocab; ++v)
                cands.push_back({live[i].cum_logprob + static_cast<double>(rows[i][v]), v,
                                 static_cast<int32_t>(i)});
        size_t keep = std::min(cands.size(), static_cast<size_t>(beam_size));
        std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), candidate_before);

        std::vector<BeamHypothesis> next;
        for (size_t k = 0; k < keep; ++k) {
            const Candidate& c = cands[k];
            BeamHypothesis h = live[c.parent];
            h.tokens.push_back(c.token);
            h.cum_logprob = c.cum;
            if (c.token == kEosId) {
                h.finished = true;
                finished.push_back(std::move(h)); // retired: keeps its slot forever
            } else {
                next.push_back(std::move(h));
            }
        }
        live = std::move(next);
    }

    const std::vector<BeamHypothesis>& pool = finished.empty() ? live : finished;
    const BeamHypothesis* best = &pool.front();
    for (const auto& h : pool)
        if (hypothesis_before(h, *best, alpha)) best = &h;
    BeamHypothesis out = *best;
    out.truncated = finished.empty();
    return out;
}

std::vector<int32_t> greedy_decode(const StepScorer& scorer, int64_t vocab, int64_t max_len) {
    std::vector<int32_t> tokens{kBosId};
    for (int64_t step = 0; step < max_len; ++step) {
        auto rows = scorer({tokens});
        if (rows.size() != 1 || static_cast<int64_t>(rows[0].size()) != vocab)
            throw ContractError("step scorer shape mismatch in greedy decoding");
        int32_t arg = 0;
        for (int32_t v = 1; v < vocab; ++v)
            if (rows[0][v] > rows[0][arg]) arg = v;
        tokens.push_back(arg);
        if (arg == kEosId) break;
    }
    return tokens;
}

StepScorer model_step_scorer(const ParameterStore& params, const ModelConfig& cfg,
                             const std::vector<int32_t>& src_ids) {
    if (src_ids.empty()) throw DataError("cannot decode an empty source sentence");
    int64_t src_len = static_cast<int64_t>(src_ids.size());

    // the encoder runs once per sentence; every step reuses its states
    Tensor enc_states_1;
    {
        Graph g;
        auto bound = bind_parameters(g, params, false);
        std::vector<float> src_mask(src_ids.size(), 1.0f);
        enc_states_1 =
            g.value(encoder_states(g, bound, cfg, src_ids, src_mask, 1, src_len, MaskMode::bidirectional, {}));
    }

    return [params, cfg, src_ids, src_len, enc_states_1](const std::vector<std::vector<int32_t>>& prefixes) {
        if (prefixes.empty()) throw ContractError("step scorer called with no prefixes");
        int64_t rows = static_cast<int64_t>(prefixes.size());
        int64_t len = static_cast<int64_t>(prefixes[0].size());
        std::vector<int32_t> tgt;
        tgt.reserve(static_cast<size_t>(rows * len));
        for (const auto& p : prefixes) {
            if (static_cast<int64_t>(p.size()) != len)
                throw ContractError("step scorer prefixes must share one length");
            tgt.insert(tgt.end(), p.begin(), p.end());
        }

        Tensor enc_rep = Tensor::zeros({rows, src_len, cfg.model_dim});
        for (int64_t r = 0; r < rows; ++r)
            std::copy(enc_states_1.data.begin(), enc_states_1.data.end(),
                      enc_rep.data.begin() + r * src_len * cfg.model_dim);
        std::vector<float> src_mask(static_cast<size_t>(rows * src_len), 1.0f);
        std::vector<float> tgt_mask(static_cast<size_t>(rows * len), 1.0f);

        Graph g;
        auto bound = bind_parameters(g, params, false);
        auto enc = g.constant(enc_rep);
        Tensor logits = g.value(decoder_logits(g, bound, cfg, tgt, tgt_mask, rows, len,
                                               std::optional<Graph::Id>(enc), &src_mask, src_len, {}));

        std::vector<std::vector<float>> out(static_cast<size_t>(rows));
        for (int64_t r = 0; r < rows; ++r) {
            const float* row = logits.data.data() + (r * len + (len - 1)) * cfg.tgt_vocab;
            double mx = row[0];
            for (int64_t v = 1; v < cfg.tgt_vocab; ++v) mx = std::max(mx, static_cast<double>(row[v]));
            double lse = 0.0;
            for (int64_t v = 0; v < cfg.tgt_vocab; ++v) lse += std::exp(static_cast<double>(row[v]) - mx);
            lse = std::log(lse);
            auto& o = out[static_cast<size_t>(r)];
            o.resize(static_cast<size_t>(cfg.tgt_vocab));
            for (int64_t v = 0; v < cfg.tgt_vocab; ++v)
                o[static_cast<size_t>(v)] = static_cast<float>(static_cast<double>(row[v]) - mx - lse);
        }
        return out;
    };
}

BeamHypothesis beam_search(const ParameterStore& params, const ModelConfig& cfg,
                           const std::vector<int32_t>& src_ids, int64_t beam_size, double alpha,
                           int64_t max_len) {
    if (max_len == 0) max_len = 2 * static_cast<int64_t>(src_ids.size()) + 10;
    return beam_search_core(model_step_scorer(params, cfg, src_ids), cfg.tgt_vocab, beam_size, alpha, max_len);
}

} // namespace nmt

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "nmt/beam.hpp"
#include "nmt/bpe.hpp"
#include "nmt/errors.hpp"
#include "nmt/rng.hpp"

using namespace nmt;

namespace {

// scorer backed by an explicit prefix -> row table; unlisted prefixes get
// the default row
struct TableScorer {
    int64_t vocab;
    std::vector<float> default_row;
    std::map<std::vector<int32_t>, std::vector<float>> rows;

    std::vector<std::vector<float>> operator()(const std::vector<std::vector<int32_t>>& prefixes) const {
        std::vector<std::vector<float>> out;
        for (const auto& p : prefixes) {
            auto it = rows.find(p);
            out.push_back(it == rows.end() ? default_row : it->second);
        }
        return out;
    }
};

ModelConfig beam_test_config(int64_t vocab) {
    ModelConfig cfg;
    cfg.enc_layers = 1;
    cfg.dec_layers = 1;
    cfg.model_dim = 8;
    cfg.ff_dim = 16;
    cfg.heads = 2;
    cfg.src_vocab = vocab;
    cfg.tgt_vocab = vocab;
    cfg.dropout = 0.0f;
    return cfg;
}

// every finished sequence of at most max_len emitted tokens, scored by the
// table — the ground truth the search must recover
void enumerate(const TableScorer& t, std::vector<int32_t>& prefix, double cum, int64_t left,
               std::function<void(const std::vector<int32_t>&, double)> visit) {
    auto row = t({prefix})[0];
    for (int32_t v = 0; v < t.vocab; ++v) {
        prefix.push_back(v);
        double c = cum + row[v];
        if (v == kEosId)
            visit(prefix, c);
        else if (left > 1)
            enumerate(t, prefix, c, left - 1, visit);
        prefix.pop_back();
    }
}

} // namespace

TEST_CASE("hand-set three-step table: beam 2 finds the argmax greedy misses") {
    TableScorer t;
    t.vocab = 5;
    t.default_row = {-9.0f, -9.0f, -0.5f, -2.0f, -2.0f};
    t.rows[{kBosId}] = {-9.0f, -9.0f, -9.0f, -0.6931f, -0.7985f};          // 3 edges out 4
    t.rows[{kBosId, 3}] = {-9.0f, -9.0f, -4.0f, -1.0f, -1.2f};             // the 3-branch goes sour
    t.rows[{kBosId, 4}] = {-9.0f, -9.0f, -0.1054f, -3.0f, -3.0f};          // the 4-branch ends well
    t.rows[{kBosId, 3, 3}] = {-9.0f, -9.0f, -1.5f, -2.0f, -2.0f};

    std::vector<int32_t> best_seq;
    double best_cum = -1e300;
    std::vector<int32_t> prefix{kBosId};
    enumerate(t, prefix, 0.0, 3, [&](const std::vector<int32_t>& seq, double cum) {
        if (cum > best_cum) {
            best_cum = cum;
            best_seq = seq;
        }
    });
    REQUIRE(best_seq == std::vector<int32_t>{kBosId, 4, kEosId});

    auto scorer = [&t](const std::vector<std::vector<int32_t>>& p) { return t(p); };
    std::vector<int32_t> greedy = greedy_decode(scorer, t.vocab, 3);
    CHECK(greedy != best_seq); // greedy commits to token 3 and never recovers

    BeamHypothesis beam2 = beam_search_core(scorer, t.vocab, 2, 0.0, 3);
    CHECK(beam2.tokens == best_seq);
    CHECK(beam2.cum_logprob == doctest::Approx(best_cum).epsilon(1e-12));
    CHECK(beam2.finished);
    CHECK(!beam2.truncated);

    BeamHypothesis beam1 = beam_search_core(scorer, t.vocab, 1, 0.0, 3);
    CHECK(beam1.tokens == greedy);
}

TEST_CASE("beam of one equals greedy on random models") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        ModelConfig cfg = beam_test_config(12);
        ParameterStore params = init_parameters(cfg, seed + 900);
        Rng rng(seed);
        std::vector<int32_t> src;
        int64_t n = 2 + static_cast<int64_t>(rng.below(4));
        for (int64_t i = 0; i < n; ++i) src.push_back(static_cast<int32_t>(rng.below(cfg.src_vocab)));

        StepScorer scorer = model_step_scorer(params, cfg, src);
        std::vector<int32_t> greedy = greedy_decode(scorer, cfg.tgt_vocab, 8);
        BeamHypothesis h = beam_search_core(scorer, cfg.tgt_vocab, 1, 1.0, 8);
        CHECK(h.tokens == greedy);
    }
}

namespace {

// pseudo-random but fully deterministic row per prefix, shared by the search
// scorer and the enumeration oracle
std::vector<float> hashed_row(const std::vector<int32_t>& prefix, uint64_t salt, int64_t vocab) {
    uint64_t s = mix_seed(0x5eedULL, salt);
    for (int32_t t : prefix) s = mix_seed(s, static_cast<uint64_t>(t) + 1);
    Rng r(s);
    std::vector<float> row(static_cast<size_t>(vocab));
    for (auto& x : row) x = -0.05f - 3.0f * (static_cast<float>(r.below(1000)) / 1000.0f);
    return row;
}

} // namespace

TEST_CASE("an exhaustive beam recovers the enumerated optimum and narrow beams never beat it") {
    const int64_t vocab = 5;
    const int64_t max_len = 4;
    for (uint64_t salt = 0; salt < 20; ++salt) {
        TableScorer t;
        t.vocab = vocab;
        // materialize every reachable prefix so scorer and oracle agree exactly
        std::function<void(std::vector<int32_t>&, int64_t)> fill = [&](std::vector<int32_t>& p, int64_t left) {
            t.rows[p] = hashed_row(p, salt, vocab);
            if (left == 0) return;
            for (int32_t v = 0; v < vocab; ++v) {
                if (v == kEosId) continue;
                p.push_back(v);
                fill(p, left - 1);
                p.pop_back();
            }
        };
        std::vector<int32_t> root{kBosId};
        fill(root, max_len - 1);
        t.default_row.assign(static_cast<size_t>(vocab), -9.0f);

        std::vector<int32_t> best_seq;
        double best_cum = 0.0;
        double best_norm = -1e300;
        std::map<std::vector<int32_t>, double> all_finished;
        std::vector<int32_t> prefix{kBosId};
        enumerate(t, prefix, 0.0, max_len, [&](const std::vector<int32_t>& seq, double cum) {
            all_finished[seq] = cum;
            double norm = cum / static_cast<double>(seq.size() - 1);
            if (norm > best_norm || (norm == best_norm && seq < best_seq)) {
                best_norm = norm;
                best_cum = cum;
                best_seq = seq;
            }
        });
        REQUIRE(!all_finished.empty());

        auto scorer = [&t](const std::vector<std::vector<int32_t>>& p) { return t(p); };
        // 4^3 = 64 non-EOS prefixes per depth, so width 200 prunes nothing
        BeamHypothesis full = beam_search_core(scorer, vocab, 200, 1.0, max_len);
        REQUIRE(full.finished);
        CHECK(full.tokens == best_seq);
        CHECK(full.cum_logprob == doctest::Approx(best_cum).epsilon(1e-9));

        for (int64_t beam = 1; beam <= 4; ++beam) {
            BeamHypothesis h = beam_search_core(scorer, vocab, beam, 1.0, max_len);
            if (!h.finished) continue;
            // a pruned search can miss the optimum but can never exceed it,
            // and whatever it returns must carry the true cumulative score
            CHECK(h.score(1.0) <= full.score(1.0) + 1e-9);
            auto it = all_finished.find(h.tokens);
            REQUIRE(it != all_finished.end());
            CHECK(h.cum_logprob == doctest::Approx(it->second).epsilon(1e-9));
        }
    }
}

TEST_CASE("candidate ties break toward the lower token id") {
    TableScorer t;
    t.vocab = 6;
    t.default_row = {-9.0f, -9.0f, -0.2f, -9.0f, -9.0f, -9.0f};
    t.rows[{kBosId}] = {-9.0f, -9.0f, -9.0f, -1.0f, -1.0f, -1.0f}; // 3, 4, 5 dead even
    auto scorer = [&t](const std::vector<std::vector<int32_t>>& p) { return t(p); };
    BeamHypothesis h = beam_search_core(scorer, t.vocab, 1, 1.0, 3);
    REQUIRE(h.tokens.size() >= 2);
    CHECK(h.tokens[1] == 3);
}

TEST_CASE("searches that never finish come back flagged as truncated") {
    TableScorer t;
    t.vocab = 5;
    t.default_row = {-1.0f, -1.0f, -1e9f, -0.5f, -1.0f}; // EOS unreachable
    auto scorer = [&t](const std::vector<std::vector<int32_t>>& p) { return t(p); };
    BeamHypothesis h = beam_search_core(scorer, t.vocab, 3, 1.0, 4);
    CHECK(h.truncated);
    CHECK(!h.finished);
    CHECK(h.tokens.size() == 5); // BOS + max_len emitted tokens
}

TEST_CASE("alpha switches the ranking between total and mean log-prob") {
    TableScorer t;
    t.vocab = 5;
    t.default_row = {-9.0f, -9.0f, -9.0f, -9.0f, -9.0f};
    t.rows[{kBosId}] = {-9.0f, -9.0f, -1.0f, -0.6f, -9.0f};       // short: EOS now at -1.0
    t.rows[{kBosId, 3}] = {-9.0f, -9.0f, -2.5f, -0.6f, -9.0f};
    t.rows[{kBosId, 3, 3}] = {-9.0f, -9.0f, -0.6f, -1.5f, -9.0f}; // long: three steps of -0.6
    auto scorer = [&t](const std::vector<std::vector<int32_t>>& p) { return t(p); };

    BeamHypothesis raw = beam_search_core(scorer, t.vocab, 2, 0.0, 3);
    CHECK(raw.tokens == std::vector<int32_t>{kBosId, kEosId}); // -1.0 beats -1.8

    BeamHypothesis norm = beam_search_core(scorer, t.vocab, 2, 1.0, 3);
    CHECK(norm.tokens == std::vector<int32_t>{kBosId, 3, 3, kEosId}); // mean -0.6 beats -1.0

    // the score accessor is exactly cum / len^alpha
    CHECK(norm.score(1.0) == doctest::Approx(norm.cum_logprob / 3.0).epsilon(1e-12));
    CHECK(norm.score(0.0) == doctest::Approx(norm.cum_logprob).epsilon(1e-12));
}

TEST_CASE("model-backed decoding caps at twice the source length plus ten") {
    ModelConfig cfg = beam_test_config(9);
    ParameterStore params = init_parameters(cfg, 4242);
    std::vector<int32_t> src{4, 5, 6};
    BeamHypothesis h = beam_search(params, cfg, src, 2, 1.0);
    CHECK(h.tokens.size() <= 1 + 2 * src.size() + 10);
    BeamHypothesis again = beam_search(params, cfg, src, 2, 1.0);
    CHECK(h.tokens == again.tokens);
    CHECK(h.cum_logprob == again.cum_logprob);
}

TEST_CASE("degenerate arguments are rejected") {
    TableScorer t;
    t.vocab = 5;
    t.default_row = {-1.0f, -1.0f, -1.0f, -1.0f, -1.0f};
    auto scorer = [&t](const std::vector<std::vector<int32_t>>& p) { return t(p); };
    CHECK_THROWS_AS(beam_search_core(scorer, 5, 0, 1.0, 4), ConfigError);
    CHECK_THROWS_AS(beam_search_core(scorer, 5, 2, 1.0, 0), ConfigError);
    CHECK_THROWS_AS(beam_search_core(scorer, 2, 2, 1.0, 4), ConfigError);

    TableScorer bad;
    bad.vocab = 4; // narrower rows than claimed
    bad.default_row = {-1.0f, -1.0f, -1.0f, -1.0f};
    auto bad_scorer = [&bad](const std::vector<std::vector<int32_t>>& p) { return bad(p); };
    CHECK_THROWS_AS(beam_search_core(bad_scorer, 5, 2, 1.0, 4), ContractError);
}
